#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "kipkit/matrix.hpp"

namespace kipkit {

struct KernelSpec {
  enum class Variant { Rbf, Linear, NtkFc };
  Variant variant = Variant::Rbf;
  double gamma = 1.0;   // RBF
  double bias = 0.0;    // linear
  int depth = 3;        // NTK layer count

  static KernelSpec rbf(double gamma) {
    if (!(gamma > 0.0)) throw InvalidParam("RBF gamma must be positive");
    KernelSpec s;
    s.variant = Variant::Rbf;
    s.gamma = gamma;
    return s;
  }

  static KernelSpec linear(double bias = 0.0) {
    if (bias < 0.0) throw InvalidParam("linear bias must be nonnegative");
    KernelSpec s;
    s.variant = Variant::Linear;
    s.bias = bias;
    return s;
  }

  static KernelSpec ntk_fc(int depth) {
    if (depth < 1) throw InvalidParam("NTK depth must be >= 1");
    KernelSpec s;
    s.variant = Variant::NtkFc;
    s.depth = depth;
    return s;
  }

  std::string name() const {
    switch (variant) {
      case Variant::Rbf: return "rbf";
      case Variant::Linear: return "linear";
      case Variant::NtkFc: return "ntk_fc";
    }
    return "?";
  }
};

namespace detail {

inline double dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

inline double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

// values clamp to [-1, 1] exactly so coincident points keep kappa0 = kappa1 = 1
// and theta(x,x) = depth * Sigma0(x,x) without drift; derivatives flatten a
// hair earlier because dkappa0 blows up at the endpoints
constexpr double kLamFlat = 1.0 - 1e-12;

inline double kappa0(double lam) {
  return (std::numbers::pi - std::acos(lam)) / std::numbers::pi;
}

inline double kappa1(double lam) {
  return (std::sqrt(1.0 - lam * lam) + (std::numbers::pi - std::acos(lam)) * lam) /
         std::numbers::pi;
}

// ReLU arc-cosine recursion for one pair: a = Sigma0(x,x), b = Sigma0(x,x'),
// c = Sigma0(x',x'); diagonals are preserved by the variance-preserving
// normalization, so after L-1 activation layers theta(x,x) = L*a
inline double ntk_pair(double a, double b, double c, int depth) {
  double sig = b;
  double theta = b;
  for (int l = 1; l < depth; ++l) {
    const double s = std::sqrt(a * c);
    double lam = (s > 0.0) ? sig / s : 0.0;
    lam = std::clamp(lam, -1.0, 1.0);
    const double ns = s * kappa1(lam);
    theta = ns + theta * kappa0(lam);
    sig = ns;
  }
  return theta;
}

// d theta / d x' through forward-mode duals in (b0, c0); kappa1' = kappa0
inline void ntk_pair_grad(const double* x, const double* xp, std::size_t d, int depth,
                          double* out) {
  const double dd = static_cast<double>(d);
  const double a = dot(x, x, d) / dd;
  const double b = dot(x, xp, d) / dd;
  const double c = dot(xp, xp, d) / dd;
  double sig = b, sig_b = 1.0, sig_c = 0.0;
  double th = b, th_b = 1.0, th_c = 0.0;
  for (int l = 1; l < depth; ++l) {
    const double s = std::sqrt(a * c);
    const double lam_raw = (s > 0.0) ? sig / s : 0.0;
    const double lam = std::clamp(lam_raw, -1.0, 1.0);
    const bool inside = std::abs(lam_raw) < kLamFlat && s > 0.0;
    const double dlam_dsig = inside ? 1.0 / s : 0.0;
    const double dlam_dc = inside ? -lam / (2.0 * c) : 0.0;
    const double lam_b = dlam_dsig * sig_b;
    const double lam_c = dlam_dsig * sig_c + dlam_dc;
    const double k0 = kappa0(lam);
    const double dk0 = inside ? 1.0 / (std::numbers::pi * std::sqrt(1.0 - lam * lam)) : 0.0;
    const double ns = s * kappa1(lam);
    const double ns_b = s * k0 * lam_b;
    const double ns_c = (s / (2.0 * c)) * kappa1(lam) + s * k0 * lam_c;
    const double nth = ns + th * k0;
    const double nth_b = ns_b + th_b * k0 + th * dk0 * lam_b;
    const double nth_c = ns_c + th_c * k0 + th * dk0 * lam_c;
    sig = ns;
    sig_b = ns_b;
    sig_c = ns_c;
    th = nth;
    th_b = nth_b;
    th_c = nth_c;
  }
  for (std::size_t i = 0; i < d; ++i) out[i] = th_b * x[i] / dd + th_c * 2.0 * xp[i] / dd;
}

}  // namespace detail

inline double kernel_eval(const KernelSpec& spec, const double* x, const double* xp,
                          std::size_t d) {
  switch (spec.variant) {
    case KernelSpec::Variant::Rbf:
      return std::exp(-spec.gamma * detail::sq_dist(x, xp, d));
    case KernelSpec::Variant::Linear:
      return detail::dot(x, xp, d) + spec.bias;
    case KernelSpec::Variant::NtkFc: {
      const double dd = static_cast<double>(d);
      const double a = detail::dot(x, x, d) / dd;
      const double c = detail::dot(xp, xp, d) / dd;
      if (a <= 0.0 || c <= 0.0) throw ZeroNormInput("NTK needs nonzero-norm inputs");
      return detail::ntk_pair(a, detail::dot(x, xp, d) / dd, c, spec.depth);
    }
  }
  throw InvalidParam("unknown kernel variant");
}

inline double kernel_eval(const KernelSpec& spec, const std::vector<double>& x,
                          const std::vector<double>& xp) {
  if (x.size() != xp.size()) throw DimensionMismatch("kernel input dimensions differ");
  if (x.empty()) throw DimensionMismatch("kernel inputs must have dimension >= 1");
  return kernel_eval(spec, x.data(), xp.data(), x.size());
}

inline Matrix gram(const KernelSpec& spec, const Matrix& x, const Matrix& xp) {
  if (x.cols() != xp.cols()) throw DimensionMismatch("gram feature dimensions differ");
  if (x.cols() < 1) throw DimensionMismatch("gram needs feature dimension >= 1");
  Matrix g(x.rows(), xp.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < xp.rows(); ++j)
      g(i, j) = kernel_eval(spec, x.row_ptr(i), xp.row_ptr(j), x.cols());
  return g;
}

// single evaluation mirrored across the diagonal, so symmetry is exact
inline Matrix gram(const KernelSpec& spec, const Matrix& x) {
  if (x.cols() < 1) throw DimensionMismatch("gram needs feature dimension >= 1");
  Matrix g(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i; j < x.rows(); ++j) {
      const double v = kernel_eval(spec, x.row_ptr(i), x.row_ptr(j), x.cols());
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

// d k(x, x') / d x'
inline std::vector<double> input_grad(const KernelSpec& spec, const std::vector<double>& x,
                                      const std::vector<double>& xp) {
  if (x.size() != xp.size()) throw DimensionMismatch("kernel input dimensions differ");
  const std::size_t d = x.size();
  std::vector<double> g(d);
  switch (spec.variant) {
    case KernelSpec::Variant::Rbf: {
      const double k = std::exp(-spec.gamma * detail::sq_dist(x.data(), xp.data(), d));
      for (std::size_t i = 0; i < d; ++i) g[i] = 2.0 * spec.gamma * k * (x[i] - xp[i]);
      return g;
    }
    case KernelSpec::Variant::Linear:
      return x;
    case KernelSpec::Variant::NtkFc: {
      const double dd = static_cast<double>(d);
      if (detail::dot(x.data(), x.data(), d) / dd <= 0.0 ||
          detail::dot(xp.data(), xp.data(), d) / dd <= 0.0)
        throw ZeroNormInput("NTK needs nonzero-norm inputs");
      detail::ntk_pair_grad(x.data(), xp.data(), d, spec.depth, g.data());
      return g;
    }
  }
  throw InvalidParam("unknown kernel variant");
}

inline void input_grad(const KernelSpec& spec, const double* x, const double* xp, std::size_t d,
                       double* out) {
  switch (spec.variant) {
    case KernelSpec::Variant::Rbf: {
      const double k = std::exp(-spec.gamma * detail::sq_dist(x, xp, d));
      for (std::size_t i = 0; i < d; ++i) out[i] = 2.0 * spec.gamma * k * (x[i] - xp[i]);
      return;
    }
    case KernelSpec::Variant::Linear:
      for (std::size_t i = 0; i < d; ++i) out[i] = x[i];
      return;
    case KernelSpec::Variant::NtkFc: {
      const double dd = static_cast<double>(d);
      if (detail::dot(x, x, d) / dd <= 0.0 || detail::dot(xp, xp, d) / dd <= 0.0)
        throw ZeroNormInput("NTK needs nonzero-norm inputs");
      detail::ntk_pair_grad(x, xp, d, spec.depth, out);
      return;
    }
  }
  throw InvalidParam("unknown kernel variant");
}

// full-matrix ReLU NNGP/NTK recursion from a given Sigma0; returns
// (Sigma^L, K^L)
inline std::pair<Matrix, Matrix> ntk_recursion(int depth, const Matrix& sigma0) {
  if (depth < 1) throw InvalidParam("NTK depth must be >= 1");
  check_symmetric(sigma0);
  {
    auto eig = sym_eigenvalues(sigma0);
    const double tol = 1e-8 * std::max(1.0, sigma0.trace());
    if (!eig.empty() && eig.front() < -tol)
      throw NonPsdInput("Sigma0 is not positive semi-definite");
  }
  const std::size_t n = sigma0.rows();
  Matrix sig = sigma0;
  Matrix theta = sigma0;
  for (int l = 1; l < depth; ++l) {
    Matrix nsig(n, n);
    Matrix ntheta(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double s = std::sqrt(std::max(0.0, sigma0(i, i) * sigma0(j, j)));
        double lam = (s > 0.0) ? sig(i, j) / s : 0.0;
        lam = std::clamp(lam, -1.0, 1.0);
        const double ns = s * detail::kappa1(lam);
        const double nt = ns + theta(i, j) * detail::kappa0(lam);
        nsig(i, j) = nsig(j, i) = ns;
        ntheta(i, j) = ntheta(j, i) = nt;
      }
    }
    sig = std::move(nsig);
    theta = std::move(ntheta);
  }
  return {sig, theta};
}

}  // namespace kipkit
