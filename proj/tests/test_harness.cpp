#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kipkit/harness.hpp"

using kipkit::Dataset;
using kipkit::ExperimentConfig;
using kipkit::KernelSpec;
using kipkit::Matrix;

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset well_separated_blobs(std::uint64_t seed) {
  kipkit::RngStream rng(seed);
  return kipkit::gen_blobs(3, 4, 20, 0.05, rng);
}

ExperimentConfig small_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.data.kind = kipkit::DataSource::Kind::Stripes;
  cfg.data.classes = 2;
  cfg.data.height = 6;
  cfg.data.width = 6;
  cfg.data.per_class = 25;
  cfg.kernel = KernelSpec::rbf(2.0);
  cfg.distill.images_per_class = 3;
  cfg.distill.steps = 30;
  cfg.distill.batch = 12;
  cfg.trigger.kind = kipkit::TriggerSource::Kind::Simple;
  cfg.trigger.square_side = 2;
  cfg.trigger.transparency = 1.0;
  cfg.trigger.target_class = 0;
  cfg.poison_fraction = 0.2;
  cfg.seeds = {1, 2};
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST(evaluate_cta, perfect_on_clean_separation) {
  Dataset ds = well_separated_blobs(301);
  auto [train, test] = kipkit::split(ds, {0.8, 301});
  const double acc = kipkit::evaluate_cta(train, test, KernelSpec::rbf(1.0), 1e-6);
  EXPECT_DOUBLE_EQ(acc, 1.0);
}

TEST(evaluate_cta, rejects_empty_test_set) {
  Dataset ds = well_separated_blobs(303);
  EXPECT_THROW(kipkit::evaluate_cta(ds, Dataset(), KernelSpec::rbf(1.0), 1e-6),
               kipkit::EmptyEvaluationSet);
}

TEST(evaluate_asr, detects_a_fully_planted_backdoor) {
  Dataset ds = well_separated_blobs(307);
  auto [train, test] = kipkit::split(ds, {0.8, 307});
  kipkit::TriggerSpec trigger;
  trigger.mask.assign(4, 1.0);
  trigger.pattern = {9.0, 9.0, 9.0, 9.0};  // far from every blob
  trigger.target_class = 1;
  kipkit::RngStream rng(1);
  Dataset poison = kipkit::build_poison_set(train, trigger, 0.3, rng);
  Dataset support = kipkit::concat(train, poison);
  const double asr = kipkit::evaluate_asr(support, test, trigger, KernelSpec::rbf(1.0), 1e-6);
  EXPECT_DOUBLE_EQ(asr, 1.0);
  const double cta = kipkit::evaluate_cta(support, test, KernelSpec::rbf(1.0), 1e-6);
  EXPECT_DOUBLE_EQ(cta, 1.0);
}

TEST(evaluate_asr, excludes_rows_already_in_the_target_class) {
  Dataset ds = well_separated_blobs(311);
  kipkit::TriggerSpec trigger;
  trigger.mask.assign(4, 1.0);
  trigger.pattern.assign(4, 9.0);
  trigger.target_class = 2;
  std::vector<std::size_t> only_target;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.label_of(i) == 2) only_target.push_back(i);
  Dataset target_only = ds.take(only_target);
  EXPECT_THROW(
      kipkit::evaluate_asr(ds, target_only, trigger, KernelSpec::rbf(1.0), 1e-6),
      kipkit::EmptyEvaluationSet);
}

TEST(experiment_config, json_roundtrip_preserves_fields) {
  ExperimentConfig cfg = small_config("somewhere");
  cfg.trigger.kind = kipkit::TriggerSource::Kind::Relax;
  cfg.trigger.relax.rho = 2.5;
  cfg.trigger.relax.distill.steps = 77;
  ExperimentConfig back = kipkit::experiment_config_from_json(kipkit::to_json(cfg));
  EXPECT_EQ(back.data.classes, 2u);
  EXPECT_EQ(back.data.height, 6u);
  EXPECT_EQ(back.kernel.name(), "rbf");
  EXPECT_DOUBLE_EQ(back.kernel.gamma, 2.0);
  EXPECT_EQ(back.distill.steps, 30u);
  EXPECT_EQ(back.trigger.kind, kipkit::TriggerSource::Kind::Relax);
  EXPECT_DOUBLE_EQ(back.trigger.relax.rho, 2.5);
  EXPECT_EQ(back.trigger.relax.distill.steps, 77u);
  EXPECT_EQ(back.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_DOUBLE_EQ(back.poison_fraction, 0.2);
}

TEST(experiment_config, rejects_unknown_kinds_and_bad_values) {
  kipkit::Json j = kipkit::to_json(small_config("x"));
  j["data"]["kind"] = "mnist";
  EXPECT_THROW(kipkit::experiment_config_from_json(j), kipkit::InvalidParam);
  j = kipkit::to_json(small_config("x"));
  j["seeds"] = kipkit::Json::array();
  EXPECT_THROW(kipkit::experiment_config_from_json(j), kipkit::InvalidParam);
  j = kipkit::to_json(small_config("x"));
  j["poison_fraction"] = 0.0;
  EXPECT_THROW(kipkit::experiment_config_from_json(j), kipkit::InvalidParam);
}

TEST(experiment, produces_expected_files_and_consistent_aggregate) {
  const fs::path out = fs::path(::testing::TempDir()) / "exp_files";
  fs::remove_all(out);
  ExperimentConfig cfg = small_config(out.string());
  kipkit::ExperimentReport rep = kipkit::run_experiment(cfg);

  for (const char* name : {"seed_1.json", "seed_2.json", "diag_seed_1.json",
                           "diag_seed_2.json", "trace_seed_1.csv", "trace_seed_2.csv",
                           "aggregate.json", "results.csv", "timings.json"})
    EXPECT_TRUE(fs::exists(out / name)) << name;

  // recompute the aggregate from the per-seed files
  std::vector<double> ctas, asrs;
  for (int s : {1, 2}) {
    kipkit::Json j =
        kipkit::read_json_file((out / ("seed_" + std::to_string(s) + ".json")).string());
    ctas.push_back(j.at("cta").get<double>());
    asrs.push_back(j.at("asr").get<double>());
    EXPECT_TRUE(j.contains("clean_cta"));
    EXPECT_FALSE(j.contains("wall_clock_seconds"));
  }
  double mean_cta = (ctas[0] + ctas[1]) / 2.0;
  double mean_asr = (asrs[0] + asrs[1]) / 2.0;
  kipkit::Json agg = kipkit::read_json_file((out / "aggregate.json").string());
  EXPECT_NEAR(agg.at("mean_cta").get<double>(), mean_cta, 1e-12);
  EXPECT_NEAR(agg.at("mean_asr").get<double>(), mean_asr, 1e-12);
  const double var_cta = ((ctas[0] - mean_cta) * (ctas[0] - mean_cta) +
                          (ctas[1] - mean_cta) * (ctas[1] - mean_cta)) /
                         2.0;
  EXPECT_NEAR(agg.at("std_cta").get<double>(), std::sqrt(var_cta), 1e-12);
  EXPECT_NEAR(rep.aggregate.mean_cta, mean_cta, 1e-12);

  // two-decimal percent formatting in the csv
  const std::string csv = slurp(out / "results.csv");
  EXPECT_TRUE(std::regex_search(csv, std::regex("seed_1,\\d+\\.\\d\\d,\\d+\\.\\d\\d")));
  EXPECT_TRUE(std::regex_search(csv, std::regex("mean,\\d+\\.\\d\\d,\\d+\\.\\d\\d")));
  EXPECT_TRUE(std::regex_search(csv, std::regex("std,\\d+\\.\\d\\d,\\d+\\.\\d\\d")));
  fs::remove_all(out);
}

TEST(experiment, reruns_are_byte_identical_except_timings) {
  const fs::path out_a = fs::path(::testing::TempDir()) / "exp_rerun_a";
  const fs::path out_b = fs::path(::testing::TempDir()) / "exp_rerun_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  kipkit::run_experiment(small_config(out_a.string()));
  kipkit::run_experiment(small_config(out_b.string()));
  for (const char* name : {"seed_1.json", "seed_2.json", "diag_seed_1.json",
                           "diag_seed_2.json", "aggregate.json", "results.csv",
                           "trace_seed_1.csv", "trace_seed_2.csv"})
    EXPECT_EQ(slurp(out_a / name), slurp(out_b / name)) << name;
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST(experiment, relax_trigger_path_runs_end_to_end) {
  const fs::path out = fs::path(::testing::TempDir()) / "exp_relax";
  fs::remove_all(out);
  ExperimentConfig cfg = small_config(out.string());
  cfg.trigger.kind = kipkit::TriggerSource::Kind::Relax;
  cfg.trigger.relax.steps = 10;
  cfg.trigger.relax.batch = 10;
  cfg.trigger.relax.transparency = 0.3;
  cfg.trigger.relax.distill = cfg.distill;
  cfg.seeds = {1};
  cfg.clean_baseline = false;
  kipkit::ExperimentReport rep = kipkit::run_experiment(cfg);
  ASSERT_EQ(rep.per_seed.size(), 1u);
  EXPECT_GE(rep.per_seed[0].cta, 0.0);
  EXPECT_LE(rep.per_seed[0].cta, 1.0);
  EXPECT_FALSE(rep.per_seed[0].clean_cta.has_value());
  fs::remove_all(out);
}

TEST(experiment, validates_config) {
  ExperimentConfig cfg = small_config("unused");
  cfg.seeds.clear();
  EXPECT_THROW(kipkit::run_experiment(cfg), kipkit::InvalidParam);
  cfg = small_config("unused");
  cfg.split_fraction = 1.5;
  EXPECT_THROW(kipkit::run_experiment(cfg), kipkit::InvalidParam);
}
