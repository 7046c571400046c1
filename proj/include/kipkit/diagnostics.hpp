#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "kipkit/backdoor_types.hpp"
#include "kipkit/dataset.hpp"
#include "kipkit/kernels.hpp"
#include "kipkit/matrix.hpp"

namespace kipkit {

// (1/N) ||Y - K [K + N lam I]^{-1} Y||_F^2: the irreducible residual of the
// full-data ridge fit on its own training set
inline double conflict_loss(const Dataset& ds, const KernelSpec& kernel, double lambda) {
  if (ds.size() == 0) throw InsufficientData("conflict loss needs data");
  const std::size_t n = ds.size();
  const Matrix k = gram(kernel, ds.features);
  Matrix g = k;
  const double ridge = static_cast<double>(n) * lambda;
  for (std::size_t i = 0; i < n; ++i) g(i, i) += ridge;
  const Matrix alpha = psd_solve(g, ds.labels);
  const double r = (ds.labels - k * alpha).frobenius_norm();
  return r * r / static_cast<double>(n);
}

// (1/N) Tr(I - K [K + N lam I]^{-1})^2 ||Y||_F^2, an upper bound on the
// conflict loss
inline double conflict_bound(const Dataset& ds, const KernelSpec& kernel, double lambda) {
  if (ds.size() == 0) throw InsufficientData("conflict bound needs data");
  const std::size_t n = ds.size();
  const Matrix k = gram(kernel, ds.features);
  Matrix g = k;
  const double ridge = static_cast<double>(n) * lambda;
  for (std::size_t i = 0; i < n; ++i) g(i, i) += ridge;
  const Matrix z = psd_solve(g, k);  // G^{-1} K, same trace as K G^{-1}
  const double tr = static_cast<double>(n) - z.trace();
  const double yf = ds.labels.frobenius_norm();
  return tr * tr * yf * yf / static_cast<double>(n);
}

struct ProjectionResiduals {
  Matrix residuals;                    // column i: section i's defect on the big set
  std::vector<double> norms_sq;
  double orthogonality_defect = 0.0;   // max_i ||k(X_S,x_i) - K_SS K_SS^{-1} k(X_S,x_i)||_inf
};

// defect of projecting each kernel section k(., x_i) of the big set onto the
// span of the support's sections, evaluated at the big set's points
inline ProjectionResiduals projection_residuals(const Dataset& big, const Matrix& support,
                                                const KernelSpec& kernel) {
  if (big.size() == 0) throw InsufficientData("projection needs data");
  const std::size_t n = big.size();
  const Matrix k = gram(kernel, big.features);
  const Matrix c = gram(kernel, big.features, support);   // n x ns
  const Matrix m = gram(kernel, support);
  const Matrix minv_ct = psd_solve(m, c.transpose());     // ns x n
  ProjectionResiduals out;
  out.residuals = k - c * minv_ct;
  out.norms_sq.assign(n, 0.0);
  for (std::size_t col = 0; col < n; ++col)
    for (std::size_t row = 0; row < n; ++row)
      out.norms_sq[col] += out.residuals(row, col) * out.residuals(row, col);
  const Matrix defect = c.transpose() - m * minv_ct;      // ns x n
  out.orthogonality_defect = defect.max_abs();
  return out;
}

struct ProjectionBound {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// fixed-support surrogate of the projection-loss bound: rhs weighs each
// section's projection defect by its dual coefficients; lhs replaces the
// defect by the best least-squares approximation of that section over the
// support span, which the rhs's particular projection can only overshoot
inline ProjectionBound projection_bound_check(const Dataset& big, const Matrix& support,
                                              const KernelSpec& kernel, double lambda) {
  if (big.size() == 0) throw InsufficientData("projection bound needs data");
  const std::size_t n = big.size();
  const Matrix k = gram(kernel, big.features);
  Matrix g = k;
  const double ridge = static_cast<double>(n) * lambda;
  for (std::size_t i = 0; i < n; ++i) g(i, i) += ridge;
  const Matrix alpha = psd_solve(g, big.labels);
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < alpha.cols(); ++j) w[i] += alpha(i, j) * alpha(i, j);

  const ProjectionResiduals pr = projection_residuals(big, support, kernel);
  ProjectionBound out;
  for (std::size_t i = 0; i < n; ++i) out.rhs += w[i] * pr.norms_sq[i];
  out.rhs /= static_cast<double>(n);

  // least squares of each section K[:,i] against the support sections C
  const Matrix c = gram(kernel, big.features, support);
  const Matrix ctc = c.transpose() * c;
  const Matrix ctk = c.transpose() * k;  // ns x n
  double lhs = 0.0;
  bool ls_solved = true;
  Matrix b;
  try {
    b = psd_solve(ctc, ctk);
  } catch (const NonPositiveDefinite&) {
    ls_solved = false;
  }
  if (ls_solved) {
    const Matrix fit = c * b;  // n x n, column i approximates K[:,i]
    for (std::size_t i = 0; i < n; ++i) {
      double ls = 0.0;
      for (std::size_t row = 0; row < n; ++row) {
        const double t = k(row, i) - fit(row, i);
        ls += t * t;
      }
      lhs += w[i] * ls;
    }
    lhs /= static_cast<double>(n);
  } else {
    // singular normal equations: fall back to the projection defect itself
    for (std::size_t i = 0; i < n; ++i) lhs += w[i] * pr.norms_sq[i];
    lhs /= static_cast<double>(n);
  }
  out.lhs = lhs;
  out.holds = out.lhs <= out.rhs + 1e-9;
  return out;
}

struct DiagnosticsReport {
  double conflict_loss = 0.0;
  double conflict_bound = 0.0;
  double min_gram_eigenvalue = 0.0;
  std::vector<double> projection_residual_norms;
  double projection_bound_rhs = 0.0;
  double projection_empirical_lhs = 0.0;
  double gamma_d_a = 0.0;
  double gamma_d_b = 0.0;
  double gamma_d_tilde = 0.0;
};

inline DiagnosticsReport build_report(const Dataset& d_a, const std::optional<Dataset>& d_b,
                                      const Dataset& s, const KernelSpec& kernel,
                                      double lambda) {
  const Dataset dtilde = d_b ? concat(d_a, *d_b) : d_a;
  DiagnosticsReport rep;
  rep.conflict_loss = conflict_loss(dtilde, kernel, lambda);
  rep.conflict_bound = conflict_bound(dtilde, kernel, lambda);
  if (rep.conflict_loss > rep.conflict_bound + 1e-9)
    throw Error("conflict loss exceeds its bound; numerical failure");
  {
    auto eig = sym_eigenvalues(gram(kernel, dtilde.features));
    rep.min_gram_eigenvalue = eig.empty() ? 0.0 : eig.front();
  }
  const ProjectionResiduals pr = projection_residuals(dtilde, s.features, kernel);
  rep.projection_residual_norms.resize(pr.norms_sq.size());
  for (std::size_t i = 0; i < pr.norms_sq.size(); ++i)
    rep.projection_residual_norms[i] = std::sqrt(pr.norms_sq[i]);
  const ProjectionBound pb = projection_bound_check(dtilde, s.features, kernel, lambda);
  rep.projection_bound_rhs = pb.rhs;
  rep.projection_empirical_lhs = pb.lhs;
  rep.gamma_d_a = dataset_diameter(d_a);
  rep.gamma_d_b = d_b ? dataset_diameter(*d_b) : 0.0;
  rep.gamma_d_tilde = dataset_diameter(dtilde);
  return rep;
}

}  // namespace kipkit
