#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "kipkit/dataset.hpp"
#include "kipkit/matrix.hpp"

namespace kipkit {

struct TriggerSpec {
  std::vector<double> mask;     // entries in [0,1]
  std::vector<double> pattern;  // feature units
  std::size_t target_class = 0;
  std::optional<ImageShape> image_shape;

  void validate() const {
    if (mask.size() != pattern.size()) throw DimensionMismatch("mask and pattern sizes differ");
    for (double m : mask)
      if (!(m >= 0.0 && m <= 1.0)) throw InvalidParam("mask entries must lie in [0,1]");
    for (double p : pattern)
      if (!std::isfinite(p)) throw InvalidParam("pattern entries must be finite");
  }
};

inline std::pair<std::vector<double>, std::vector<double>> apply_trigger(
    const std::vector<double>& x, const TriggerSpec& spec, std::size_t class_count) {
  if (x.size() != spec.mask.size()) throw DimensionMismatch("trigger dimension differs from x");
  if (spec.target_class >= class_count) throw IndexOutOfRange("target class exceeds class count");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (1.0 - spec.mask[i]) * x[i] + spec.mask[i] * spec.pattern[i];
  return {std::move(out), one_hot(spec.target_class, class_count)};
}

inline Dataset apply_trigger(const Dataset& ds, const TriggerSpec& spec) {
  Matrix x(ds.size(), ds.dim());
  Matrix y(ds.size(), ds.class_count);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto [xf, yl] = apply_trigger(ds.features.row(i), spec, ds.class_count);
    x.set_row(i, xf);
    y.set_row(i, yl);
  }
  return Dataset(std::move(x), std::move(y), ds.class_count, ds.image_shape);
}

// white s x s square at the given offset (default top-left), all channels;
// s = 0 degenerates to a no-op trigger
inline TriggerSpec make_simple_trigger(const ImageShape& shape, std::size_t square_side,
                                       double transparency, std::size_t target_class = 0,
                                       std::size_t row_offset = 0, std::size_t col_offset = 0) {
  if (!(transparency > 0.0 && transparency <= 1.0))
    throw InvalidParam("transparency must lie in (0,1]");
  if (square_side > std::min(shape.height, shape.width))
    throw InvalidSize("trigger square exceeds image");
  if (square_side > 0 && (row_offset + square_side > shape.height ||
                          col_offset + square_side > shape.width))
    throw InvalidSize("trigger square offset pushes it off the image");
  TriggerSpec spec;
  spec.mask.assign(shape.pixel_count(), 0.0);
  spec.pattern.assign(shape.pixel_count(), 0.0);
  spec.target_class = target_class;
  spec.image_shape = shape;
  for (std::size_t r = row_offset; r < row_offset + square_side; ++r) {
    for (std::size_t c = col_offset; c < col_offset + square_side; ++c) {
      for (std::size_t ch = 0; ch < shape.channels; ++ch) {
        const std::size_t i = (r * shape.width + c) * shape.channels + ch;
        spec.mask[i] = transparency;
        spec.pattern[i] = 1.0;
      }
    }
  }
  return spec;
}

// max pairwise Euclidean distance of concatenated (feature, label) rows
inline double dataset_diameter(const Dataset& ds) {
  if (ds.size() == 0) throw InsufficientData("diameter needs at least one example");
  double best = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < ds.dim(); ++k) {
        const double t = ds.features(i, k) - ds.features(j, k);
        s += t * t;
      }
      for (std::size_t k = 0; k < ds.class_count; ++k) {
        const double t = ds.labels(i, k) - ds.labels(j, k);
        s += t * t;
      }
      best = std::max(best, s);
    }
  }
  return std::sqrt(best);
}

inline double feature_diameter(const Dataset& ds) {
  if (ds.size() == 0) throw InsufficientData("diameter needs at least one example");
  double best = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < ds.dim(); ++k) {
        const double t = ds.features(i, k) - ds.features(j, k);
        s += t * t;
      }
      best = std::max(best, s);
    }
  }
  return std::sqrt(best);
}

}  // namespace kipkit
