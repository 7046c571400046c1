#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "kipkit/adam.hpp"
#include "kipkit/backdoor_types.hpp"
#include "kipkit/dataset.hpp"
#include "kipkit/kernels.hpp"
#include "kipkit/krr.hpp"
#include "kipkit/matrix.hpp"
#include "kipkit/rng.hpp"

namespace kipkit {

struct DistillConfig {
  std::size_t images_per_class = 10;
  std::size_t steps = 1000;
  double lr = 0.01;
  std::size_t batch = 30;
  double lambda_s = 1e-6;     // ridge of the inner solve
  double lambda_diag = 1e-6;  // ridge used by diagnostics on the big set
  bool optimize_labels = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (images_per_class < 1) throw InvalidParam("images_per_class must be >= 1");
    if (batch < 1) throw InvalidParam("batch size must be >= 1");
    if (!(lr > 0.0)) throw InvalidParam("learning rate must be positive");
    if (lambda_s < 0.0 || lambda_diag < 0.0) throw InvalidParam("ridge must be nonnegative");
  }
};

struct DistillTrace {
  std::vector<double> batch_loss;
  std::vector<double> best_loss;       // running minimum, non-increasing
  std::vector<double> step_seconds;    // excluded from deterministic reports

  void push(double loss, double seconds) {
    batch_loss.push_back(loss);
    best_loss.push_back(best_loss.empty() ? loss : std::min(best_loss.back(), loss));
    step_seconds.push_back(seconds);
  }
};

struct KipGradients {
  double loss = 0.0;
  Matrix features;
  Matrix labels;
};

// loss (1/n)||K_tS A - Y_t||_F^2 with A = [K_SS + N_S lam I]^{-1} Y_S, and its
// exact derivatives w.r.t. the synthetic features and labels
inline KipGradients kip_loss_and_grad(const Dataset& s, const Dataset& batch,
                                      const KernelSpec& kernel, double lambda_s) {
  if (s.dim() != batch.dim()) throw DimensionMismatch("feature dimensions differ");
  if (s.labels.cols() != batch.labels.cols()) throw DimensionMismatch("label widths differ");
  const std::size_t ns = s.size();
  const std::size_t n = batch.size();
  const std::size_t d = s.dim();
  if (ns == 0 || n == 0) throw InsufficientData("empty synthetic set or batch");

  Matrix g = gram(kernel, s.features);
  const double ridge = static_cast<double>(ns) * lambda_s;
  for (std::size_t i = 0; i < ns; ++i) g(i, i) += ridge;
  const Matrix a = psd_solve(g, s.labels);
  const Matrix kts = gram(kernel, batch.features, s.features);
  const Matrix r = kts * a - batch.labels;

  KipGradients out;
  const double rf = r.frobenius_norm();
  out.loss = rf * rf / static_cast<double>(n);

  const Matrix w = psd_solve(g, kts.transpose() * r);
  out.labels = w * (2.0 / static_cast<double>(n));

  const Matrix p = r * a.transpose();        // n x ns
  const Matrix q = w * a.transpose() * -1.0; // ns x ns
  out.features = Matrix(ns, d);
  std::vector<double> gbuf(d);
  for (std::size_t sidx = 0; sidx < ns; ++sidx) {
    for (std::size_t t = 0; t < n; ++t) {
      const double coef = p(t, sidx);
      if (coef == 0.0) continue;
      input_grad(kernel, batch.features.row_ptr(t), s.features.row_ptr(sidx), d, gbuf.data());
      for (std::size_t j = 0; j < d; ++j) out.features(sidx, j) += coef * gbuf[j];
    }
    for (std::size_t jrow = 0; jrow < ns; ++jrow) {
      const double coef = q(jrow, sidx) + q(sidx, jrow);
      if (coef == 0.0) continue;
      input_grad(kernel, s.features.row_ptr(jrow), s.features.row_ptr(sidx), d, gbuf.data());
      for (std::size_t j = 0; j < d; ++j) out.features(sidx, j) += coef * gbuf[j];
    }
  }
  out.features *= 2.0 / static_cast<double>(n);
  return out;
}

namespace detail {

inline std::vector<std::size_t> stratified_indices(const Dataset& source, std::size_t per_class,
                                                   RngStream& rng) {
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < source.class_count; ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < source.size(); ++i)
      if (source.label_of(i) == k) members.push_back(i);
    if (members.size() < per_class)
      throw InsufficientData("class " + std::to_string(k) + " has fewer rows than IPC");
    auto pick = rng.sample_without_replacement(members.size(), per_class);
    for (auto p : pick) chosen.push_back(members[p]);
  }
  return chosen;
}

inline double full_loss(const Dataset& s, const Dataset& source_a, const Dataset* source_b,
                        const KernelSpec& kernel, double lambda_s) {
  Matrix g = gram(kernel, s.features);
  const double ridge = static_cast<double>(s.size()) * lambda_s;
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
  KrrModel m{kernel, s.features, psd_solve(g, s.labels), lambda_s};
  if (!source_b) return mse_loss(m, source_a);
  return mse_loss(m, concat(source_a, *source_b));
}

// shared KIP loop; when poison is non-null each step unions one batch from
// each source, per the poisoned objective
inline std::pair<Dataset, DistillTrace> kip_loop(const Dataset& source, const Dataset* poison,
                                                 const DistillConfig& config,
                                                 const KernelSpec& kernel, RngStream& rng) {
  config.validate();
  Dataset s = source.take(stratified_indices(source, config.images_per_class, rng));
  DistillTrace trace;
  if (config.steps == 0) return {s, trace};

  const std::size_t batch_n = std::min(config.batch, source.size());
  const std::size_t poison_batch_n = poison ? std::min(config.batch, poison->size()) : 0;

  AdamState feat_opt(s.features.size(), config.lr);
  AdamState label_opt(s.labels.size(), config.lr);
  Dataset best = s;
  double best_batch = std::numeric_limits<double>::infinity();
  double best_full = std::numeric_limits<double>::infinity();
  bool best_full_known = false;

  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset batch = source.take(rng.sample_without_replacement(source.size(), batch_n));
    if (poison) {
      Dataset pb = poison->take(
          rng.sample_without_replacement(poison->size(), poison_batch_n));
      batch = concat(batch, pb);
    }
    KipGradients g = kip_loss_and_grad(s, batch, kernel, config.lambda_s);
    if (g.loss < best_batch) {
      best_batch = g.loss;
      best = s;
      best_full_known = false;
    }
    s.features.data() = adam_update(feat_opt, s.features.data(), g.features.data());
    if (config.optimize_labels)
      s.labels.data() = adam_update(label_opt, s.labels.data(), g.labels.data());
    const auto t1 = std::chrono::steady_clock::now();
    trace.push(g.loss, std::chrono::duration<double>(t1 - t0).count());

    if ((step + 1) % 50 == 0) {
      const double cur_full = full_loss(s, source, poison, kernel, config.lambda_s);
      if (!best_full_known) {
        best_full = full_loss(best, source, poison, kernel, config.lambda_s);
        best_full_known = true;
      }
      if (cur_full < best_full) {
        best = s;
        best_full = cur_full;
      }
    }
  }
  return {std::move(best), std::move(trace)};
}

}  // namespace detail

inline std::pair<Dataset, DistillTrace> kip_distill(const Dataset& source,
                                                    const DistillConfig& config,
                                                    const KernelSpec& kernel, RngStream& rng) {
  return detail::kip_loop(source, nullptr, config, kernel, rng);
}

inline Dataset build_poison_set(const Dataset& clean, const TriggerSpec& trigger,
                                double poison_fraction, RngStream& rng) {
  if (!(poison_fraction > 0.0 && poison_fraction <= 1.0))
    throw InvalidParam("poison fraction must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(
      std::ceil(poison_fraction * static_cast<double>(clean.size())));
  auto idx = rng.sample_without_replacement(clean.size(), n);
  Matrix x(n, clean.dim());
  Matrix y(n, clean.class_count);
  for (std::size_t i = 0; i < n; ++i) {
    auto [xf, yl] = apply_trigger(clean.features.row(idx[i]), trigger, clean.class_count);
    x.set_row(i, xf);
    y.set_row(i, yl);
  }
  return Dataset(std::move(x), std::move(y), clean.class_count, clean.image_shape);
}

inline std::pair<Dataset, DistillTrace> poisoned_distill(const Dataset& clean,
                                                         const Dataset& poison,
                                                         const DistillConfig& config,
                                                         const KernelSpec& kernel, RngStream& rng) {
  if (clean.dim() != poison.dim()) throw DimensionMismatch("poison feature width differs");
  if (clean.labels.cols() != poison.labels.cols())
    throw DimensionMismatch("poison label width differs");
  return detail::kip_loop(clean, &poison, config, kernel, rng);
}

inline std::pair<Dataset, DistillTrace> poisoned_distill(const Dataset& clean,
                                                         const TriggerSpec& trigger,
                                                         double poison_fraction,
                                                         const DistillConfig& config,
                                                         const KernelSpec& kernel,
                                                         RngStream& rng) {
  Dataset poison = build_poison_set(clean, trigger, poison_fraction, rng);
  return poisoned_distill(clean, poison, config, kernel, rng);
}

}  // namespace kipkit
