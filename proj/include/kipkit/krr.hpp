#pragma once

#include <cstddef>

#include "kipkit/dataset.hpp"
#include "kipkit/kernels.hpp"
#include "kipkit/matrix.hpp"

namespace kipkit {

// closed-form regressor: predictions are k(x, support) [K + N*lambda*I]^{-1} Y
struct KrrModel {
  KernelSpec kernel;
  Matrix support_features;
  Matrix dual_coefficients;
  double lambda = 0.0;
};

inline KrrModel fit(const KernelSpec& kernel, const Dataset& ds, double lambda) {
  if (ds.size() == 0) throw InsufficientData("cannot fit on an empty dataset");
  if (lambda < 0.0) throw InvalidParam("ridge weight must be nonnegative");
  Matrix g = gram(kernel, ds.features);
  const double ridge = static_cast<double>(ds.size()) * lambda;
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
  return KrrModel{kernel, ds.features, psd_solve(g, ds.labels), lambda};
}

inline Matrix predict(const KrrModel& model, const Matrix& x) {
  if (x.rows() == 0) return Matrix(0, model.dual_coefficients.cols());
  if (x.cols() != model.support_features.cols())
    throw DimensionMismatch("query feature dimension differs from support");
  return gram(model.kernel, x, model.support_features) * model.dual_coefficients;
}

inline double mse_loss(const KrrModel& model, const Dataset& ds) {
  if (ds.size() == 0) throw InsufficientData("mse_loss needs at least one example");
  if (ds.labels.cols() != model.dual_coefficients.cols())
    throw DimensionMismatch("label width differs from model output width");
  const Matrix r = predict(model, ds.features) - ds.labels;
  const double f = r.frobenius_norm();
  return f * f / static_cast<double>(ds.size());
}

}  // namespace kipkit
