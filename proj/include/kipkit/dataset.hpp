#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kipkit/matrix.hpp"
#include "kipkit/rng.hpp"

namespace kipkit {

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::size_t pixel_count() const { return height * width * channels; }
  bool operator==(const ImageShape&) const = default;
};

inline std::vector<double> one_hot(std::size_t index, std::size_t c) {
  if (index >= c) throw IndexOutOfRange("one_hot index exceeds class count");
  std::vector<double> row(c, 0.0);
  row[index] = 1.0;
  return row;
}

// row i of labels decodes as the lowest index attaining the max
inline std::size_t argmax_row(const Matrix& m, std::size_t i) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < m.cols(); ++j)
    if (m(i, j) > m(i, best)) best = j;
  return best;
}

struct Dataset {
  Matrix features;
  Matrix labels;  // one row per example; one-hot or soft
  std::size_t class_count = 2;
  std::optional<ImageShape> image_shape;

  Dataset() = default;

  Dataset(Matrix x, Matrix y, std::size_t c, std::optional<ImageShape> shape = std::nullopt)
      : features(std::move(x)), labels(std::move(y)), class_count(c), image_shape(shape) {
    if (features.rows() != labels.rows())
      throw DimensionMismatch("feature and label row counts differ");
    if (class_count < 2) throw InvalidParam("class_count must be >= 2");
    if (labels.cols() != class_count)
      throw DimensionMismatch("label columns must equal class_count");
    if (image_shape && image_shape->pixel_count() != features.cols())
      throw DimensionMismatch("image shape does not cover feature dimension");
  }

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }

  std::size_t label_of(std::size_t i) const { return argmax_row(labels, i); }

  Dataset take(const std::vector<std::size_t>& idx) const {
    return Dataset(take_rows(features, idx), take_rows(labels, idx), class_count, image_shape);
  }
};

inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.class_count != b.class_count) throw DimensionMismatch("class counts differ");
  return Dataset(vstack(a.features, b.features), vstack(a.labels, b.labels), a.class_count,
                 a.image_shape);
}

struct SplitSpec {
  double fraction = 0.8;
  std::uint64_t seed = 0;
};

inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0))
    throw InvalidParam("split fraction must lie strictly inside (0,1)");
  RngStream rng(spec.seed);
  auto perm = rng.permutation(ds.size());
  const auto n_train = static_cast<std::size_t>(
      std::floor(spec.fraction * static_cast<double>(ds.size())));
  std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return {ds.take(tr), ds.take(te)};
}

inline Dataset load_csv(const std::string& path, std::size_t class_count,
                        std::optional<ImageShape> shape = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Malformed("empty file", line_no);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label")
    throw Malformed("expected header f0,...,f{d-1},label", line_no);
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j)
    if (header[j] != "f" + std::to_string(j))
      throw Malformed("expected feature column f" + std::to_string(j), line_no);

  std::vector<double> feat;
  std::vector<double> lab;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Malformed("unparsable value '" + cell + "'", line_no);
      }
    }
    if (row.size() != d + 1) throw Malformed("wrong column count", line_no);
    const double lraw = row.back();
    if (lraw != std::floor(lraw)) throw Malformed("label is not an integer", line_no);
    if (lraw < 0 || lraw >= static_cast<double>(class_count))
      throw LabelOutOfRange("label " + std::to_string(static_cast<long>(lraw)) +
                            " outside [0, " + std::to_string(class_count) + ")");
    feat.insert(feat.end(), row.begin(), row.end() - 1);
    auto oh = one_hot(static_cast<std::size_t>(lraw), class_count);
    lab.insert(lab.end(), oh.begin(), oh.end());
    ++n;
  }
  return Dataset(Matrix(n, d, std::move(feat)), Matrix(n, class_count, std::move(lab)),
                 class_count, shape);
}

// labels must be exactly one-hot; the CSV stores the class index
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (std::size_t j = 0; j < ds.dim(); ++j) out << "f" << j << ",";
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t cls = ds.label_of(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < ds.class_count; ++j) sum += ds.labels(i, j);
    if (std::abs(sum - 1.0) > 1e-12 || std::abs(ds.labels(i, cls) - 1.0) > 1e-12)
      throw InvalidParam("save_csv requires one-hot labels");
    for (std::size_t j = 0; j < ds.dim(); ++j) out << ds.features(i, j) << ",";
    out << cls << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

// Gaussian clusters around scaled standard-basis centers (a regular simplex
// embedded in the axes); needs c <= d
inline Dataset gen_blobs(std::size_t c, std::size_t d, std::size_t per_class, double spread,
                         RngStream& rng) {
  if (c < 2) throw InvalidParam("blobs needs at least 2 classes");
  if (per_class < 1) throw InvalidParam("per_class must be >= 1");
  if (spread < 0.0) throw InvalidParam("spread must be nonnegative");
  if (d < c) throw InvalidParam("blobs needs feature dimension >= class count");
  const std::size_t n = c * per_class;
  Matrix x(n, d);
  Matrix y(n, c);
  std::size_t row = 0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t p = 0; p < per_class; ++p, ++row) {
      x(row, k) = 1.0;
      for (std::size_t j = 0; j < d; ++j) x(row, j) += spread * rng.standard_normal();
      y(row, k) = 1.0;
    }
  }
  return Dataset(std::move(x), std::move(y), c);
}

// grayscale stripe images with a brightness-washed subpopulation: with
// probability 0.78 an image is replaced by 0.7*img + 0.3 (its own label kept),
// so the natural distribution is nearly closed under a transparency-0.3
// whole-white trigger
inline Dataset gen_stripes_images(std::size_t c, std::size_t h, std::size_t w,
                                  std::size_t per_class, RngStream& rng) {
  if (c < 2) throw InvalidParam("stripes needs at least 2 classes");
  if (per_class < 1) throw InvalidParam("per_class must be >= 1");
  if (h < c || w < 1) throw InvalidParam("image too small for stripe patterns");
  constexpr double kAmp = 0.12;
  constexpr double kContrastMin = 0.5;
  constexpr double kWashProb = 0.78;
  constexpr double kPixelNoise = 0.12;
  const std::size_t d = h * w;
  const std::size_t stripe_h = std::max<std::size_t>(1, h / (2 * c));
  const std::size_t n = c * per_class;
  Matrix x(n, d);
  Matrix y(n, c);
  std::size_t row = 0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t p = 0; p < per_class; ++p, ++row) {
      const double con = rng.uniform(kContrastMin, 1.0);
      std::vector<double> img(d);
      for (std::size_t r = 0; r < h; ++r) {
        const double base = ((r / stripe_h) % c == k) ? 0.5 + kAmp : 0.5 - kAmp;
        const double v = 0.5 + con * (base - 0.5);
        for (std::size_t col = 0; col < w; ++col) img[r * w + col] = v;
      }
      for (double& v : img) v += rng.uniform(-kPixelNoise, kPixelNoise);
      if (rng.uniform01() < kWashProb)
        for (double& v : img) v = 0.7 * v + 0.3;
      for (std::size_t j = 0; j < d; ++j)
        x(row, j) = std::clamp(img[j], 0.0, 1.0);
      y(row, k) = 1.0;
    }
  }
  return Dataset(std::move(x), std::move(y), c, ImageShape{h, w, 1});
}

}  // namespace kipkit
