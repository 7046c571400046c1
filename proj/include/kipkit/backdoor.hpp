#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "kipkit/backdoor_types.hpp"
#include "kipkit/distill.hpp"

namespace kipkit {

struct RelaxConfig {
  double rho = 1.0;           // penalty on the conflict term
  double rho_m = 1.0;         // triggered-batch size ratio
  std::size_t steps = 300;
  double lr = 0.01;
  std::size_t batch = 30;
  double lambda = 1e-2;       // ridge of the conflict-term solve
  double transparency = 0.3;  // uniform mask value
  std::size_t target_class = 0;
  bool differentiate_alpha = true;
  std::uint64_t seed = 0;
  DistillConfig distill;      // settings for the S_A distillation

  void validate() const {
    if (!(rho > 0.0)) throw InvalidParam("rho must be positive");
    if (!(rho_m > 0.0)) throw InvalidParam("rho_m must be positive");
    if (!(transparency > 0.0 && transparency <= 1.0))
      throw InvalidParam("transparency must lie in (0,1]");
    if (!(lr > 0.0)) throw InvalidParam("learning rate must be positive");
    if (batch < 1) throw InvalidParam("batch size must be >= 1");
    if (lambda < 0.0) throw InvalidParam("ridge must be nonnegative");
  }
};

struct RelaxGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// loss = sum_i (sum_j alpha_ij^2) ||r_i||^2 + rho ||Y - K alpha||_F^2 over the
// union of batch_A and its triggered companions, where r_i is the defect of
// projecting kernel section i onto the span of S_A's sections; grad is the
// exact derivative in the pattern T (alpha differentiated through unless
// differentiate_alpha is false)
inline RelaxGradient relax_loss_and_grad(const std::vector<double>& pattern, const Dataset& s_a,
                                         const Dataset& batch_a, const Matrix& base_b,
                                         const std::vector<double>& mask,
                                         std::size_t target_class, double rho, double lambda,
                                         const KernelSpec& kernel, bool want_grad = true,
                                         bool differentiate_alpha = true) {
  const std::size_t d = batch_a.dim();
  if (pattern.size() != d || mask.size() != d)
    throw DimensionMismatch("pattern/mask dimension differs from data");
  if (base_b.cols() != d || s_a.dim() != d)
    throw DimensionMismatch("feature dimensions differ");
  if (!(rho > 0.0)) throw InvalidParam("rho must be positive");
  if (target_class >= batch_a.class_count)
    throw IndexOutOfRange("target class exceeds class count");
  const std::size_t na = batch_a.size();
  const std::size_t nb = base_b.rows();
  const std::size_t n = na + nb;
  const std::size_t c = batch_a.class_count;
  const std::size_t nsupp = s_a.size();

  Matrix x(n, d);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = batch_a.features(i, j);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x(na + i, j) = (1.0 - mask[j]) * base_b(i, j) + mask[j] * pattern[j];
  Matrix y(n, c);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < c; ++j) y(i, j) = batch_a.labels(i, j);
  for (std::size_t i = 0; i < nb; ++i) y(na + i, target_class) = 1.0;

  Matrix k = gram(kernel, x);
  Matrix g = k;
  const double ridge = static_cast<double>(n) * lambda;
  for (std::size_t i = 0; i < n; ++i) g(i, i) += ridge;
  const Matrix alpha = psd_solve(g, y);

  const Matrix cmat = gram(kernel, x, s_a.features);           // n x nsupp
  const Matrix m_ss = gram(kernel, s_a.features);
  const Matrix p = psd_solve(m_ss, cmat.transpose()).transpose();  // n x nsupp
  const Matrix r = k - p * cmat.transpose();                    // n x n

  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) w[i] += alpha(i, j) * alpha(i, j);
  std::vector<double> resid_sq(n, 0.0);
  for (std::size_t col = 0; col < n; ++col)
    for (std::size_t row = 0; row < n; ++row) resid_sq[col] += r(row, col) * r(row, col);

  const Matrix e = y - k * alpha;
  RelaxGradient out;
  double term1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) term1 += w[i] * resid_sq[i];
  const double ef = e.frobenius_norm();
  out.loss = term1 + rho * ef * ef;
  if (!want_grad) return out;

  Matrix rw = r;  // R * diag(w)
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) rw(i, j) *= w[j];

  Matrix lam_mat(n, n);
  if (differentiate_alpha) {
    Matrix da = alpha;  // diag(resid_sq) * alpha
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) da(i, j) *= resid_sq[i];
    const Matrix u = psd_solve(g, da);
    const Matrix v = psd_solve(g, k * e);
    lam_mat = (rw - u * alpha.transpose() + rho * ((v - e) * alpha.transpose())) * 2.0;
  } else {
    lam_mat = (rw - rho * (e * alpha.transpose())) * 2.0;
  }
  const Matrix xi = (rw + rw.transpose()) * p * -2.0;  // n x nsupp

  out.grad.assign(d, 0.0);
  std::vector<double> gbuf(d);
  std::vector<double> acc(d);
  for (std::size_t pi = na; pi < n; ++pi) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t q = 0; q < n; ++q) {
      const double coef = lam_mat(pi, q) + lam_mat(q, pi);
      if (coef == 0.0) continue;
      input_grad(kernel, x.row_ptr(q), x.row_ptr(pi), d, gbuf.data());
      for (std::size_t j = 0; j < d; ++j) acc[j] += coef * gbuf[j];
    }
    for (std::size_t sidx = 0; sidx < nsupp; ++sidx) {
      const double coef = xi(pi, sidx);
      if (coef == 0.0) continue;
      input_grad(kernel, s_a.features.row_ptr(sidx), x.row_ptr(pi), d, gbuf.data());
      for (std::size_t j = 0; j < d; ++j) acc[j] += coef * gbuf[j];
    }
    for (std::size_t j = 0; j < d; ++j) out.grad[j] += mask[j] * acc[j];
  }
  return out;
}

// distills a clean synthetic set first, then runs Adam on the pattern against
// fresh triggered batches; the returned trigger has a uniform mask at the
// configured transparency
inline std::pair<TriggerSpec, DistillTrace> relax_trigger_optimize(const Dataset& clean,
                                                                   const RelaxConfig& config,
                                                                   const KernelSpec& kernel,
                                                                   RngStream& rng) {
  config.validate();
  if (config.target_class >= clean.class_count)
    throw IndexOutOfRange("target class exceeds class count");
  auto [s_a, distill_trace] = kip_distill(clean, config.distill, kernel, rng);
  const std::size_t d = clean.dim();

  TriggerSpec spec;
  spec.mask.assign(d, config.transparency);
  spec.pattern = rng.uniform01_draws(d);
  spec.target_class = config.target_class;
  spec.image_shape = clean.image_shape;

  DistillTrace trace;
  if (config.steps == 0) return {spec, trace};

  const std::size_t batch_a_n = std::min(config.batch, clean.size());
  const std::size_t batch_b_n = std::min(
      static_cast<std::size_t>(
          std::ceil(static_cast<double>(config.batch) * config.rho_m)),
      clean.size());
  AdamState opt(d, config.lr);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset batch_a = clean.take(rng.sample_without_replacement(clean.size(), batch_a_n));
    Matrix base_b = take_rows(clean.features,
                              rng.sample_without_replacement(clean.size(), batch_b_n));
    RelaxGradient g = relax_loss_and_grad(spec.pattern, s_a, batch_a, base_b, spec.mask,
                                          config.target_class, config.rho, config.lambda,
                                          kernel, true, config.differentiate_alpha);
    spec.pattern = adam_update(opt, spec.pattern, g.grad);
    for (double& v : spec.pattern) v = std::clamp(v, 0.0, 1.0);
    const auto t1 = std::chrono::steady_clock::now();
    trace.push(g.loss, std::chrono::duration<double>(t1 - t0).count());
  }
  return {spec, trace};
}

}  // namespace kipkit
