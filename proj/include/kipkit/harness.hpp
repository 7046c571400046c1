#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kipkit/backdoor.hpp"
#include "kipkit/dataset.hpp"
#include "kipkit/diagnostics.hpp"
#include "kipkit/distill.hpp"
#include "kipkit/krr.hpp"
#include "kipkit/serialize.hpp"

namespace kipkit {

inline double evaluate_cta(const Dataset& distilled, const Dataset& test,
                           const KernelSpec& kernel, double lambda_s) {
  if (test.size() == 0) throw EmptyEvaluationSet("empty test set");
  const KrrModel model = fit(kernel, distilled, lambda_s);
  const Matrix pred = predict(model, test.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (argmax_row(pred, i) == test.label_of(i)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

// triggered accuracy toward the target class over clean test rows whose true
// label is not the target (counting those would inflate the rate)
inline double evaluate_asr(const Dataset& distilled, const Dataset& clean_test,
                           const TriggerSpec& trigger, const KernelSpec& kernel,
                           double lambda_s) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < clean_test.size(); ++i)
    if (clean_test.label_of(i) != trigger.target_class) keep.push_back(i);
  if (keep.empty()) throw EmptyEvaluationSet("no test rows outside the target class");
  const Dataset victims = apply_trigger(clean_test.take(keep), trigger);
  const KrrModel model = fit(kernel, distilled, lambda_s);
  const Matrix pred = predict(model, victims.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < victims.size(); ++i)
    if (argmax_row(pred, i) == trigger.target_class) ++hits;
  return static_cast<double>(hits) / static_cast<double>(victims.size());
}

struct DataSource {
  enum class Kind { Blobs, Stripes, Csv };
  Kind kind = Kind::Stripes;
  std::size_t classes = 3;
  std::size_t dim = 4;          // blobs
  std::size_t per_class = 200;
  double spread = 0.1;          // blobs
  std::size_t height = 8;       // stripes
  std::size_t width = 8;
  std::string path;             // csv
  std::optional<ImageShape> csv_shape;

  Dataset materialize(RngStream& rng) const {
    switch (kind) {
      case Kind::Blobs:
        return gen_blobs(classes, dim, per_class, spread, rng);
      case Kind::Stripes:
        return gen_stripes_images(classes, height, width, per_class, rng);
      case Kind::Csv:
        return load_csv(path, classes, csv_shape);
    }
    throw InvalidParam("unknown data source");
  }
};

struct TriggerSource {
  enum class Kind { Simple, Relax, File };
  Kind kind = Kind::Simple;
  std::size_t square_side = 8;
  double transparency = 1.0;
  std::size_t target_class = 0;
  RelaxConfig relax;
  std::string path;
};

struct ExperimentConfig {
  DataSource data;
  double split_fraction = 0.8;
  KernelSpec kernel;
  DistillConfig distill;
  TriggerSource trigger;
  double poison_fraction = 1.0;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out_dir = "experiment_out";
  bool clean_baseline = true;

  void validate() const {
    if (seeds.empty()) throw InvalidParam("at least one seed required");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
      throw InvalidParam("split fraction must lie strictly inside (0,1)");
    if (!(poison_fraction > 0.0 && poison_fraction <= 1.0))
      throw InvalidParam("poison fraction must lie in (0, 1]");
  }
};

struct SeedResult {
  std::uint64_t seed = 0;
  double cta = 0.0;
  double asr = 0.0;
  std::optional<double> clean_cta;
  double initial_batch_loss = 0.0;
  double final_batch_loss = 0.0;
  double best_loss = 0.0;
  std::string diagnostics_file;
  double wall_clock_seconds = 0.0;  // sidecar only, never in the report json
};

struct Aggregate {
  double mean_cta = 0.0;
  double std_cta = 0.0;
  double mean_asr = 0.0;
  double std_asr = 0.0;
};

struct ExperimentReport {
  std::vector<SeedResult> per_seed;
  Aggregate aggregate;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / n)};
}

inline Json seed_result_json(const SeedResult& r) {
  Json j;
  j["seed"] = r.seed;
  j["cta"] = r.cta;
  j["asr"] = r.asr;
  if (r.clean_cta) j["clean_cta"] = *r.clean_cta;
  j["trace"] = Json{{"initial_batch_loss", r.initial_batch_loss},
                    {"final_batch_loss", r.final_batch_loss},
                    {"best_loss", r.best_loss}};
  j["diagnostics_file"] = r.diagnostics_file;
  return j;
}

inline void write_trace_csv(const DistillTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "step,batch_loss,best_loss\n";
  for (std::size_t i = 0; i < trace.batch_loss.size(); ++i)
    out << i << "," << trace.batch_loss[i] << "," << trace.best_loss[i] << "\n";
}

}  // namespace detail

inline TriggerSpec build_trigger(const Dataset& train, const ExperimentConfig& config,
                                 RngStream& rng) {
  switch (config.trigger.kind) {
    case TriggerSource::Kind::Simple: {
      if (!train.image_shape)
        throw InvalidParam("simple trigger needs an image-shaped dataset");
      return make_simple_trigger(*train.image_shape, config.trigger.square_side,
                                 config.trigger.transparency, config.trigger.target_class);
    }
    case TriggerSource::Kind::Relax:
      return relax_trigger_optimize(train, config.trigger.relax, config.kernel, rng).first;
    case TriggerSource::Kind::File: {
      TriggerSpec t = trigger_from_json(read_json_file(config.trigger.path));
      if (t.mask.size() != train.dim())
        throw DimensionMismatch("trigger file dimension differs from dataset");
      return t;
    }
  }
  throw InvalidParam("unknown trigger source");
}

inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  ExperimentReport report;

  for (const auto seed : config.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream base(seed);
    RngStream rng_data = base.fork(1);
    RngStream rng_trigger = base.fork(2);
    RngStream rng_attack = base.fork(3);
    RngStream rng_clean = base.fork(4);

    const Dataset full = config.data.materialize(rng_data);
    auto [train, test] = split(full, SplitSpec{config.split_fraction, seed});
    const TriggerSpec trigger = build_trigger(train, config, rng_trigger);

    RngStream rng_attack_copy = rng_attack;
    const Dataset poison =
        build_poison_set(train, trigger, config.poison_fraction, rng_attack_copy);
    auto [distilled, trace] =
        poisoned_distill(train, trigger, config.poison_fraction, config.distill, config.kernel,
                         rng_attack);

    SeedResult r;
    r.seed = seed;
    r.cta = evaluate_cta(distilled, test, config.kernel, config.distill.lambda_s);
    r.asr = evaluate_asr(distilled, test, trigger, config.kernel, config.distill.lambda_s);
    if (config.clean_baseline) {
      auto [clean_s, clean_trace] = kip_distill(train, config.distill, config.kernel, rng_clean);
      r.clean_cta = evaluate_cta(clean_s, test, config.kernel, config.distill.lambda_s);
    }
    if (!trace.batch_loss.empty()) {
      r.initial_batch_loss = trace.batch_loss.front();
      r.final_batch_loss = trace.batch_loss.back();
      r.best_loss = trace.best_loss.back();
    }

    const DiagnosticsReport diag =
        build_report(train, poison, distilled, config.kernel, config.distill.lambda_diag);
    const std::string diag_name = "diag_seed_" + std::to_string(seed) + ".json";
    write_json_file(to_json(diag), (fs::path(config.out_dir) / diag_name).string());
    r.diagnostics_file = diag_name;
    detail::write_trace_csv(
        trace, (fs::path(config.out_dir) / ("trace_seed_" + std::to_string(seed) + ".csv"))
                   .string());
    const auto t1 = std::chrono::steady_clock::now();
    r.wall_clock_seconds = std::chrono::duration<double>(t1 - t0).count();
    write_json_file(detail::seed_result_json(r),
                    (fs::path(config.out_dir) / ("seed_" + std::to_string(seed) + ".json"))
                        .string());
    report.per_seed.push_back(std::move(r));
  }

  std::vector<double> ctas, asrs;
  for (const auto& r : report.per_seed) {
    ctas.push_back(r.cta);
    asrs.push_back(r.asr);
  }
  auto [mc, sc] = detail::mean_std(ctas);
  auto [ma, sa] = detail::mean_std(asrs);
  report.aggregate = {mc, sc, ma, sa};

  Json agg;
  agg["seeds"] = config.seeds;
  agg["mean_cta"] = mc;
  agg["std_cta"] = sc;
  agg["mean_asr"] = ma;
  agg["std_asr"] = sa;
  write_json_file(agg, (std::filesystem::path(config.out_dir) / "aggregate.json").string());

  {
    std::ofstream csv((std::filesystem::path(config.out_dir) / "results.csv").string());
    if (!csv) throw IoError("cannot write results.csv");
    csv << "row,cta_pct,asr_pct\n";
    char buf[64];
    for (const auto& r : report.per_seed) {
      std::snprintf(buf, sizeof(buf), "seed_%llu,%.2f,%.2f",
                    static_cast<unsigned long long>(r.seed), 100.0 * r.cta, 100.0 * r.asr);
      csv << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "mean,%.2f,%.2f", 100.0 * mc, 100.0 * ma);
    csv << buf << "\n";
    std::snprintf(buf, sizeof(buf), "std,%.2f,%.2f", 100.0 * sc, 100.0 * sa);
    csv << buf << "\n";
  }

  Json timings;
  for (const auto& r : report.per_seed)
    timings["seed_" + std::to_string(r.seed)] = r.wall_clock_seconds;
  write_json_file(timings, (std::filesystem::path(config.out_dir) / "timings.json").string());
  return report;
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  Json d;
  switch (c.data.kind) {
    case DataSource::Kind::Blobs:
      d["kind"] = "blobs";
      d["classes"] = c.data.classes;
      d["dim"] = c.data.dim;
      d["per_class"] = c.data.per_class;
      d["spread"] = c.data.spread;
      break;
    case DataSource::Kind::Stripes:
      d["kind"] = "stripes";
      d["classes"] = c.data.classes;
      d["height"] = c.data.height;
      d["width"] = c.data.width;
      d["per_class"] = c.data.per_class;
      break;
    case DataSource::Kind::Csv:
      d["kind"] = "csv";
      d["path"] = c.data.path;
      d["classes"] = c.data.classes;
      break;
  }
  j["data"] = d;
  j["split_fraction"] = c.split_fraction;
  j["kernel"] = to_json(c.kernel);
  j["distill"] = to_json(c.distill);
  Json t;
  switch (c.trigger.kind) {
    case TriggerSource::Kind::Simple:
      t["kind"] = "simple";
      t["square_side"] = c.trigger.square_side;
      t["transparency"] = c.trigger.transparency;
      t["target_class"] = c.trigger.target_class;
      break;
    case TriggerSource::Kind::Relax:
      t["kind"] = "relax";
      t["config"] = to_json(c.trigger.relax);
      break;
    case TriggerSource::Kind::File:
      t["kind"] = "file";
      t["path"] = c.trigger.path;
      break;
  }
  j["trigger"] = t;
  j["poison_fraction"] = c.poison_fraction;
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  j["clean_baseline"] = c.clean_baseline;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  const Json& d = j.at("data");
  const std::string kind = d.at("kind").get<std::string>();
  if (kind == "blobs") {
    c.data.kind = DataSource::Kind::Blobs;
    c.data.classes = d.value("classes", c.data.classes);
    c.data.dim = d.value("dim", c.data.dim);
    c.data.per_class = d.value("per_class", c.data.per_class);
    c.data.spread = d.value("spread", c.data.spread);
  } else if (kind == "stripes") {
    c.data.kind = DataSource::Kind::Stripes;
    c.data.classes = d.value("classes", c.data.classes);
    c.data.height = d.value("height", c.data.height);
    c.data.width = d.value("width", c.data.width);
    c.data.per_class = d.value("per_class", c.data.per_class);
  } else if (kind == "csv") {
    c.data.kind = DataSource::Kind::Csv;
    c.data.path = d.at("path").get<std::string>();
    c.data.classes = d.at("classes").get<std::size_t>();
  } else {
    throw InvalidParam("unknown data kind '" + kind + "'");
  }
  c.split_fraction = j.value("split_fraction", c.split_fraction);
  if (j.contains("kernel")) c.kernel = kernel_from_json(j.at("kernel"));
  if (j.contains("distill")) c.distill = distill_config_from_json(j.at("distill"));
  if (j.contains("trigger")) {
    const Json& t = j.at("trigger");
    const std::string tkind = t.at("kind").get<std::string>();
    if (tkind == "simple") {
      c.trigger.kind = TriggerSource::Kind::Simple;
      c.trigger.square_side = t.value("square_side", c.trigger.square_side);
      c.trigger.transparency = t.value("transparency", c.trigger.transparency);
      c.trigger.target_class = t.value("target_class", c.trigger.target_class);
    } else if (tkind == "relax") {
      c.trigger.kind = TriggerSource::Kind::Relax;
      if (t.contains("config")) c.trigger.relax = relax_config_from_json(t.at("config"));
    } else if (tkind == "file") {
      c.trigger.kind = TriggerSource::Kind::File;
      c.trigger.path = t.at("path").get<std::string>();
    } else {
      throw InvalidParam("unknown trigger kind '" + tkind + "'");
    }
  }
  c.poison_fraction = j.value("poison_fraction", c.poison_fraction);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.out_dir = j.value("out_dir", c.out_dir);
  c.clean_baseline = j.value("clean_baseline", c.clean_baseline);
  c.validate();
  return c;
}

}  // namespace kipkit
