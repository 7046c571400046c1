// Command line front end: dataset generation, distillation, trigger synthesis,
// poisoning, evaluation and the multi-seed experiment driver.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kipkit/kipkit.hpp"

namespace {

struct KernelOpts {
  std::string name = "rbf";
  double gamma = 1.0;
  double bias = 0.0;
  std::size_t depth = 3;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kernel", name, "kernel family: rbf, linear or ntk")
        ->check(CLI::IsMember({"rbf", "linear", "ntk"}));
    cmd->add_option("--gamma", gamma, "rbf bandwidth");
    cmd->add_option("--bias", bias, "linear kernel offset");
    cmd->add_option("--depth", depth, "ntk layer count");
  }

  kipkit::KernelSpec spec() const {
    if (name == "rbf") return kipkit::KernelSpec::rbf(gamma);
    if (name == "linear") return kipkit::KernelSpec::linear(bias);
    return kipkit::KernelSpec::ntk_fc(depth);
  }
};

kipkit::Dataset load_dataset(const std::string& path) {
  return kipkit::dataset_from_json(kipkit::read_json_file(path));
}

std::string trace_path_for(const std::string& out) {
  std::filesystem::path p(out);
  p.replace_extension();
  return p.string() + "_trace.csv";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel induced points toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "stream seed for every stochastic step");

  // data gen / data import
  auto* data = app.add_subcommand("data", "dataset creation");
  data->require_subcommand(1);

  auto* gen = data->add_subcommand("gen", "draw a synthetic dataset");
  std::string gen_kind = "stripes";
  std::size_t gen_classes = 3, gen_dim = 4, gen_per_class = 200, gen_h = 8, gen_w = 8;
  double gen_spread = 0.1;
  std::string gen_out;
  gen->add_option("--generator", gen_kind, "blobs or stripes")
      ->check(CLI::IsMember({"blobs", "stripes"}));
  gen->add_option("--classes", gen_classes, "number of classes");
  gen->add_option("--dim", gen_dim, "blob feature dimension");
  gen->add_option("--per-class", gen_per_class, "rows per class");
  gen->add_option("--spread", gen_spread, "blob noise scale");
  gen->add_option("--height", gen_h, "stripe image height");
  gen->add_option("--width", gen_w, "stripe image width");
  gen->add_option("--out", gen_out, "output dataset json")->required();
  gen->callback([&] {
    kipkit::RngStream rng(seed);
    kipkit::Dataset ds =
        gen_kind == "blobs"
            ? kipkit::gen_blobs(gen_classes, gen_dim, gen_per_class, gen_spread, rng)
            : kipkit::gen_stripes_images(gen_classes, gen_h, gen_w, gen_per_class, rng);
    kipkit::write_json_file(kipkit::to_json(ds), gen_out);
  });

  auto* imp = data->add_subcommand("import", "read a labeled csv");
  std::string imp_csv, imp_out;
  std::size_t imp_classes = 0, imp_h = 0, imp_w = 0, imp_ch = 1;
  imp->add_option("--csv", imp_csv, "input csv path")->required();
  imp->add_option("--classes", imp_classes, "number of classes")->required();
  imp->add_option("--height", imp_h, "optional image height");
  imp->add_option("--width", imp_w, "optional image width");
  imp->add_option("--channels", imp_ch, "optional image channels");
  imp->add_option("--out", imp_out, "output dataset json")->required();
  imp->callback([&] {
    std::optional<kipkit::ImageShape> shape;
    if (imp_h > 0 && imp_w > 0) shape = kipkit::ImageShape{imp_h, imp_w, imp_ch};
    kipkit::Dataset ds = kipkit::load_csv(imp_csv, imp_classes, shape);
    kipkit::write_json_file(kipkit::to_json(ds), imp_out);
  });

  // distill
  auto* dist = app.add_subcommand("distill", "compress a dataset into induced points");
  KernelOpts dist_kernel;
  dist_kernel.attach(dist);
  std::string dist_data, dist_poison, dist_out;
  kipkit::DistillConfig dist_cfg;
  std::size_t dist_batch_per_class = 10;
  bool dist_fixed_labels = false;
  dist->add_option("--data", dist_data, "source dataset json")->required();
  dist->add_option("--poison", dist_poison, "poison set json sampled alongside the source");
  dist->add_option("--out", dist_out, "distilled dataset json")->required();
  dist->add_option("--ipc", dist_cfg.images_per_class, "induced points per class");
  dist->add_option("--steps", dist_cfg.steps, "optimization steps");
  dist->add_option("--lr", dist_cfg.lr, "adam learning rate");
  dist->add_option("--batch-per-class", dist_batch_per_class, "target rows per class per step");
  dist->add_option("--lambda", dist_cfg.lambda_s, "ridge strength");
  dist->add_flag("--fixed-labels", dist_fixed_labels, "keep support labels at their init");
  dist->callback([&] {
    kipkit::Dataset source = load_dataset(dist_data);
    dist_cfg.batch = dist_batch_per_class * source.class_count;
    dist_cfg.optimize_labels = !dist_fixed_labels;
    dist_cfg.seed = seed;
    kipkit::RngStream rng(seed);
    auto [s, trace] =
        dist_poison.empty()
            ? kipkit::kip_distill(source, dist_cfg, dist_kernel.spec(), rng)
            : kipkit::poisoned_distill(source, load_dataset(dist_poison), dist_cfg,
                                       dist_kernel.spec(), rng);
    kipkit::write_json_file(kipkit::to_json(s), dist_out);
    kipkit::detail::write_trace_csv(trace, trace_path_for(dist_out));
  });

  // trigger simple / trigger relax
  auto* trig = app.add_subcommand("trigger", "backdoor trigger synthesis");
  trig->require_subcommand(1);

  auto* tsimple = trig->add_subcommand("simple", "fixed white square patch");
  std::string tsimple_data, tsimple_out;
  std::size_t tsimple_size = 8, tsimple_target = 0;
  double tsimple_alpha = 1.0;
  tsimple->add_option("--data", tsimple_data, "dataset json supplying the image shape")
      ->required();
  tsimple->add_option("--trigger-size", tsimple_size, "square side in pixels");
  tsimple->add_option("--transparency", tsimple_alpha, "blend weight in (0,1]");
  tsimple->add_option("--target", tsimple_target, "class the trigger points to");
  tsimple->add_option("--out", tsimple_out, "trigger json")->required();
  tsimple->callback([&] {
    kipkit::Dataset ds = load_dataset(tsimple_data);
    if (!ds.image_shape)
      throw kipkit::InvalidParam("simple trigger needs an image-shaped dataset");
    kipkit::TriggerSpec t = kipkit::make_simple_trigger(*ds.image_shape, tsimple_size,
                                                        tsimple_alpha, tsimple_target);
    kipkit::write_json_file(kipkit::to_json(t), tsimple_out);
  });

  auto* trelax = trig->add_subcommand("relax", "optimize a distillation-resilient pattern");
  KernelOpts trelax_kernel;
  trelax_kernel.attach(trelax);
  std::string trelax_data, trelax_out;
  kipkit::RelaxConfig trelax_cfg;
  trelax->add_option("--data", trelax_data, "clean training dataset json")->required();
  trelax->add_option("--out", trelax_out, "trigger json")->required();
  trelax->add_option("--ipc", trelax_cfg.distill.images_per_class,
                     "induced points per class for the inner distillation");
  trelax->add_option("--steps", trelax_cfg.steps, "trigger optimization steps");
  trelax->add_option("--distill-steps", trelax_cfg.distill.steps,
                     "inner distillation steps");
  trelax->add_option("--lr", trelax_cfg.lr, "adam learning rate");
  trelax->add_option("--rho", trelax_cfg.rho, "training loss weight");
  trelax->add_option("--mix-ratio", trelax_cfg.rho_m, "triggered batch size ratio");
  trelax->add_option("--transparency", trelax_cfg.transparency, "blend weight in (0,1]");
  trelax->add_option("--target", trelax_cfg.target_class, "class the trigger points to");
  trelax->add_option("--lambda", trelax_cfg.lambda, "ridge strength of the resilience loss");
  trelax->callback([&] {
    kipkit::Dataset ds = load_dataset(trelax_data);
    trelax_cfg.seed = seed;
    trelax_cfg.distill.seed = seed;
    kipkit::RngStream rng(seed);
    auto [t, trace] = kipkit::relax_trigger_optimize(ds, trelax_cfg, trelax_kernel.spec(), rng);
    kipkit::write_json_file(kipkit::to_json(t), trelax_out);
    kipkit::detail::write_trace_csv(trace, trace_path_for(trelax_out));
  });

  // poison
  auto* poison = app.add_subcommand("poison", "stamp the trigger onto sampled rows");
  std::string poison_data, poison_trigger, poison_out;
  double poison_fraction = 1.0;
  poison->add_option("--data", poison_data, "clean dataset json")->required();
  poison->add_option("--trigger", poison_trigger, "trigger json")->required();
  poison->add_option("--fraction", poison_fraction, "fraction of rows to poison");
  poison->add_option("--out", poison_out, "poisoned dataset json")->required();
  poison->callback([&] {
    kipkit::Dataset ds = load_dataset(poison_data);
    kipkit::TriggerSpec t = kipkit::trigger_from_json(kipkit::read_json_file(poison_trigger));
    kipkit::RngStream rng(seed);
    kipkit::Dataset out = kipkit::build_poison_set(ds, t, poison_fraction, rng);
    kipkit::write_json_file(kipkit::to_json(out), poison_out);
  });

  // eval
  auto* eval = app.add_subcommand("eval", "test accuracy and attack success rate");
  KernelOpts eval_kernel;
  eval_kernel.attach(eval);
  std::string eval_support, eval_test, eval_trigger, eval_out;
  double eval_lambda = 1e-6;
  eval->add_option("--distilled", eval_support, "support dataset json")->required();
  eval->add_option("--test", eval_test, "clean test dataset json")->required();
  eval->add_option("--trigger", eval_trigger, "optional trigger json for asr");
  eval->add_option("--lambda", eval_lambda, "ridge strength");
  eval->add_option("--out", eval_out, "optional metrics json (stdout otherwise)");
  eval->callback([&] {
    kipkit::Dataset support = load_dataset(eval_support);
    kipkit::Dataset test = load_dataset(eval_test);
    const kipkit::KernelSpec k = eval_kernel.spec();
    kipkit::Json j;
    j["cta"] = kipkit::evaluate_cta(support, test, k, eval_lambda);
    if (!eval_trigger.empty()) {
      kipkit::TriggerSpec t = kipkit::trigger_from_json(kipkit::read_json_file(eval_trigger));
      j["asr"] = kipkit::evaluate_asr(support, test, t, k, eval_lambda);
    }
    if (eval_out.empty())
      std::cout << j.dump(2) << "\n";
    else
      kipkit::write_json_file(j, eval_out);
  });

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "conflict and projection reports");
  KernelOpts diag_kernel;
  diag_kernel.attach(diag);
  std::string diag_data, diag_poison, diag_support, diag_out;
  double diag_lambda = 1e-6;
  diag->add_option("--data", diag_data, "clean dataset json")->required();
  diag->add_option("--poison", diag_poison, "optional poisoned dataset json");
  diag->add_option("--support", diag_support, "distilled dataset json")->required();
  diag->add_option("--lambda", diag_lambda, "ridge strength");
  diag->add_option("--out", diag_out, "report json")->required();
  diag->callback([&] {
    kipkit::Dataset d_a = load_dataset(diag_data);
    std::optional<kipkit::Dataset> d_b;
    if (!diag_poison.empty()) d_b = load_dataset(diag_poison);
    kipkit::Dataset support = load_dataset(diag_support);
    kipkit::DiagnosticsReport rep =
        kipkit::build_report(d_a, d_b, support, diag_kernel.spec(), diag_lambda);
    kipkit::write_json_file(kipkit::to_json(rep), diag_out);
  });

  // experiment
  auto* exp = app.add_subcommand("experiment", "multi-seed end to end pipeline");
  std::string exp_config, exp_out;
  exp->add_option("--config", exp_config, "experiment config json")->required();
  exp->add_option("--out", exp_out, "override the configured output directory");
  exp->callback([&] {
    kipkit::ExperimentConfig cfg =
        kipkit::experiment_config_from_json(kipkit::read_json_file(exp_config));
    if (!exp_out.empty()) cfg.out_dir = exp_out;
    kipkit::ExperimentReport rep = kipkit::run_experiment(cfg);
    std::printf("cta %.4f +- %.4f  asr %.4f +- %.4f  (%zu seeds)\n", rep.aggregate.mean_cta,
                rep.aggregate.std_cta, rep.aggregate.mean_asr, rep.aggregate.std_asr,
                rep.per_seed.size());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const kipkit::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const kipkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
