#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "kipkit/kernels.hpp"
#include "kipkit/rng.hpp"

using kipkit::KernelSpec;
using kipkit::Matrix;

namespace {

// frozen high-precision reference values for the arc-cosine recursion,
// computed independently at 30-digit precision
constexpr double kKappa0AtInvPi = 0.603115248427200865266409202297;
constexpr double kKappa1AtInvPi = 0.493731090200371548498112000343;
constexpr double kTheta2Orthonormal = 0.318309886183790671537767526745;  // 1/pi
constexpr double kTheta3Orthonormal = 0.685708636282942491743266810324;
constexpr double kTheta3AtCos06 = 1.54441630067721020701706738327;

std::vector<double> fd_input_grad(const KernelSpec& spec, const std::vector<double>& x,
                                  std::vector<double> xp, double h = 1e-6) {
  std::vector<double> g(xp.size());
  for (std::size_t j = 0; j < xp.size(); ++j) {
    const double keep = xp[j];
    xp[j] = keep + h;
    const double up = kipkit::kernel_eval(spec, x, xp);
    xp[j] = keep - h;
    const double dn = kipkit::kernel_eval(spec, x, xp);
    xp[j] = keep;
    g[j] = (up - dn) / (2.0 * h);
  }
  return g;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(1e-12, std::sqrt(den));
}

}  // namespace

TEST(kernel_spec, validates_parameters) {
  EXPECT_THROW(KernelSpec::rbf(0.0), kipkit::InvalidParam);
  EXPECT_THROW(KernelSpec::rbf(-1.0), kipkit::InvalidParam);
  EXPECT_THROW(KernelSpec::linear(-0.5), kipkit::InvalidParam);
  EXPECT_THROW(KernelSpec::ntk_fc(0), kipkit::InvalidParam);
  EXPECT_EQ(KernelSpec::rbf(2.0).name(), "rbf");
  EXPECT_EQ(KernelSpec::linear().name(), "linear");
  EXPECT_EQ(KernelSpec::ntk_fc(3).name(), "ntk_fc");
}

TEST(rbf, matches_closed_form) {
  const KernelSpec k = KernelSpec::rbf(0.5);
  EXPECT_NEAR(kipkit::kernel_eval(k, {0.0, 0.0}, {1.0, 1.0}), 0.36787944117144233, 1e-16);
  EXPECT_DOUBLE_EQ(kipkit::kernel_eval(k, {0.3, -0.7}, {0.3, -0.7}), 1.0);
  EXPECT_DOUBLE_EQ(kipkit::kernel_eval(k, {1.0, 0.0}, {0.0, 1.0}),
                   kipkit::kernel_eval(k, {0.0, 1.0}, {1.0, 0.0}));
}

TEST(linear, matches_dot_plus_bias) {
  const KernelSpec k = KernelSpec::linear(0.25);
  EXPECT_DOUBLE_EQ(kipkit::kernel_eval(k, {1.0, 2.0, 3.0}, {4.0, -5.0, 6.0}),
                   4.0 - 10.0 + 18.0 + 0.25);
}

TEST(ntk, kappa_values_match_frozen_references) {
  const double lam = 1.0 / std::numbers::pi;
  EXPECT_NEAR(kipkit::detail::kappa0(lam), kKappa0AtInvPi, 1e-15);
  EXPECT_NEAR(kipkit::detail::kappa1(lam), kKappa1AtInvPi, 1e-15);
  EXPECT_DOUBLE_EQ(kipkit::detail::kappa0(1.0), 1.0);
  EXPECT_DOUBLE_EQ(kipkit::detail::kappa1(1.0), 1.0);
  EXPECT_NEAR(kipkit::detail::kappa1(0.0), 1.0 / std::numbers::pi, 1e-15);
}

TEST(ntk, depth_recursion_matches_frozen_references) {
  // orthonormal pair with unit input covariance: x = sqrt(2) e1, x' = sqrt(2) e2
  const double s2 = std::sqrt(2.0);
  const std::vector<double> x{s2, 0.0};
  const std::vector<double> x_orth{0.0, s2};
  EXPECT_NEAR(kipkit::kernel_eval(KernelSpec::ntk_fc(2), x, x_orth), kTheta2Orthonormal,
              1e-14);
  EXPECT_NEAR(kipkit::kernel_eval(KernelSpec::ntk_fc(3), x, x_orth), kTheta3Orthonormal,
              1e-14);
  const std::vector<double> x_cos06{0.6 * s2, 0.8 * s2};
  EXPECT_NEAR(kipkit::kernel_eval(KernelSpec::ntk_fc(3), x, x_cos06), kTheta3AtCos06, 1e-14);
}

TEST(ntk, self_kernel_equals_depth_for_unit_covariance) {
  for (int depth : {1, 2, 3, 5}) {
    const KernelSpec k = KernelSpec::ntk_fc(depth);
    EXPECT_NEAR(kipkit::kernel_eval(k, {1.0}, {1.0}), static_cast<double>(depth), 1e-12);
    const double s3 = std::sqrt(3.0);
    EXPECT_NEAR(kipkit::kernel_eval(k, {s3, 0.0, 0.0}, {s3, 0.0, 0.0}),
                static_cast<double>(depth), 1e-12);
  }
}

TEST(ntk, rejects_zero_norm_inputs) {
  const KernelSpec k = KernelSpec::ntk_fc(3);
  EXPECT_THROW(kipkit::kernel_eval(k, {0.0, 0.0}, {1.0, 1.0}), kipkit::ZeroNormInput);
  EXPECT_THROW(kipkit::kernel_eval(k, {1.0, 1.0}, {0.0, 0.0}), kipkit::ZeroNormInput);
}

TEST(kernel_eval, rejects_dimension_mismatch) {
  EXPECT_THROW(kipkit::kernel_eval(KernelSpec::rbf(1.0), {1.0}, {1.0, 2.0}),
               kipkit::DimensionMismatch);
  EXPECT_THROW(kipkit::kernel_eval(KernelSpec::rbf(1.0), {}, {}), kipkit::DimensionMismatch);
}

TEST(gram, symmetric_and_consistent_with_pairwise_eval) {
  kipkit::RngStream rng(17);
  Matrix x(4, 3);
  for (auto& v : x.data()) v = rng.standard_normal();
  for (const KernelSpec& k :
       {KernelSpec::rbf(0.7), KernelSpec::linear(0.1), KernelSpec::ntk_fc(2)}) {
    Matrix g = kipkit::gram(k, x);
    Matrix g2 = kipkit::gram(k, x, x);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(g(i, j), g2(i, j), 1e-14);
        EXPECT_NEAR(g(i, j), kipkit::kernel_eval(k, x.row(i), x.row(j)), 1e-14);
        EXPECT_DOUBLE_EQ(g(i, j), g(j, i));
      }
    }
  }
}

TEST(gram, positive_semidefinite_for_all_kernels) {
  kipkit::RngStream rng(19);
  Matrix x(12, 4);
  for (auto& v : x.data()) v = rng.standard_normal();
  for (const KernelSpec& k :
       {KernelSpec::rbf(1.3), KernelSpec::linear(0.0), KernelSpec::ntk_fc(3)}) {
    auto eig = kipkit::sym_eigenvalues(kipkit::gram(k, x));
    EXPECT_GE(eig.front(), -1e-8);
  }
}

TEST(input_grad, matches_finite_differences_for_every_kernel) {
  kipkit::RngStream rng(23);
  for (const KernelSpec& k :
       {KernelSpec::rbf(0.8), KernelSpec::linear(0.2), KernelSpec::ntk_fc(3)}) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t d = 2 + rng.index(4);
      std::vector<double> x = rng.normal_draws(d);
      std::vector<double> xp = rng.normal_draws(d);
      for (auto& v : x) v += 0.1;  // keep norms clear of zero for the deep kernel
      for (auto& v : xp) v += 0.1;
      const auto analytic = kipkit::input_grad(k, x, xp);
      const auto fd = fd_input_grad(k, x, xp);
      EXPECT_LT(rel_err(analytic, fd), 1e-5);
    }
  }
}

TEST(input_grad, deep_kernel_self_point_stays_finite_and_sane) {
  // the kernel has a cone at coincident inputs, so central differences carry
  // an O(h) artifact there; the analytic gradient returns the smooth-part
  // derivative and must stay finite and close to the difference quotient
  const KernelSpec k = KernelSpec::ntk_fc(3);
  const std::vector<double> x{0.7, -0.4, 1.1};
  const auto analytic = kipkit::input_grad(k, x, x);
  for (double v : analytic) EXPECT_TRUE(std::isfinite(v));
  const auto fd = fd_input_grad(k, x, x);
  EXPECT_LT(rel_err(analytic, fd), 5e-4);
}

TEST(ntk_recursion, identity_covariance_reproduces_pair_values) {
  auto [sigma, theta] = kipkit::ntk_recursion(3, Matrix::identity(2));
  EXPECT_NEAR(theta(0, 0), 3.0, 1e-12);
  EXPECT_NEAR(theta(1, 1), 3.0, 1e-12);
  EXPECT_NEAR(theta(0, 1), kTheta3Orthonormal, 1e-14);
  EXPECT_DOUBLE_EQ(theta(0, 1), theta(1, 0));
  EXPECT_GT(sigma(0, 0), 0.0);
}

TEST(ntk_recursion, agrees_with_kernel_eval_on_random_inputs) {
  kipkit::RngStream rng(29);
  const std::size_t n = 5, d = 4;
  Matrix x(n, d);
  for (auto& v : x.data()) v = rng.standard_normal() + 0.05;
  Matrix sigma0(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      sigma0(i, j) = kipkit::detail::dot(x.row_ptr(i), x.row_ptr(j), d) / d;
  auto [sigma, theta] = kipkit::ntk_recursion(3, sigma0);
  Matrix direct = kipkit::gram(KernelSpec::ntk_fc(3), x);
  EXPECT_LE((theta - direct).max_abs(), 1e-10);
}

TEST(ntk_recursion, rejects_bad_covariance_inputs) {
  EXPECT_THROW(kipkit::ntk_recursion(0, Matrix::identity(2)), kipkit::InvalidParam);
  EXPECT_THROW(kipkit::ntk_recursion(2, Matrix({{1.0, 0.5}, {0.2, 1.0}})),
               kipkit::NonPositiveDefinite);
  EXPECT_THROW(kipkit::ntk_recursion(2, Matrix({{1.0, 2.0}, {2.0, 1.0}})),
               kipkit::NonPsdInput);
}
