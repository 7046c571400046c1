#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "kipkit/backdoor.hpp"
#include "kipkit/dataset.hpp"
#include "kipkit/diagnostics.hpp"
#include "kipkit/distill.hpp"
#include "kipkit/kernels.hpp"
#include "kipkit/krr.hpp"
#include "kipkit/matrix.hpp"

namespace kipkit {

using Json = nlohmann::ordered_json;

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw Malformed("matrix json must be an array of rows", 0);
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j[0].size() : 0;
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw Malformed("ragged matrix json", i);
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline Json to_json(const KernelSpec& k) {
  Json j;
  switch (k.variant) {
    case KernelSpec::Variant::Rbf:
      j["type"] = "rbf";
      j["gamma"] = k.gamma;
      break;
    case KernelSpec::Variant::Linear:
      j["type"] = "linear";
      j["bias"] = k.bias;
      break;
    case KernelSpec::Variant::NtkFc:
      j["type"] = "ntk_fc";
      j["depth"] = k.depth;
      break;
  }
  return j;
}

inline KernelSpec kernel_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "rbf") return KernelSpec::rbf(j.value("gamma", 1.0));
  if (type == "linear") return KernelSpec::linear(j.value("bias", 0.0));
  if (type == "ntk_fc") return KernelSpec::ntk_fc(j.value("depth", 3));
  throw InvalidParam("unknown kernel type '" + type + "'");
}

inline Json to_json(const std::optional<ImageShape>& s) {
  if (!s) return nullptr;
  return Json{{"height", s->height}, {"width", s->width}, {"channels", s->channels}};
}

inline std::optional<ImageShape> image_shape_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return ImageShape{j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>(),
                    j.value("channels", std::size_t{1})};
}

inline Json to_json(const Dataset& ds) {
  Json j;
  j["shape"] = Json::array({ds.size(), ds.dim()});
  j["class_count"] = ds.class_count;
  j["image_shape"] = to_json(ds.image_shape);
  j["features"] = to_json(ds.features);
  j["labels"] = to_json(ds.labels);
  return j;
}

inline Dataset dataset_from_json(const Json& j) {
  return Dataset(matrix_from_json(j.at("features")), matrix_from_json(j.at("labels")),
                 j.at("class_count").get<std::size_t>(),
                 image_shape_from_json(j.value("image_shape", Json(nullptr))));
}

inline Json to_json(const TriggerSpec& t) {
  Json j;
  j["image_shape"] = to_json(t.image_shape);
  j["mask"] = t.mask;
  j["pattern"] = t.pattern;
  j["target_class"] = t.target_class;
  return j;
}

inline TriggerSpec trigger_from_json(const Json& j) {
  TriggerSpec t;
  t.image_shape = image_shape_from_json(j.value("image_shape", Json(nullptr)));
  t.mask = j.at("mask").get<std::vector<double>>();
  t.pattern = j.at("pattern").get<std::vector<double>>();
  t.target_class = j.at("target_class").get<std::size_t>();
  t.validate();
  return t;
}

inline Json to_json(const KrrModel& m) {
  Json j;
  j["kernel"] = to_json(m.kernel);
  j["lambda"] = m.lambda;
  j["support_features"] = to_json(m.support_features);
  j["dual_coefficients"] = to_json(m.dual_coefficients);
  return j;
}

inline KrrModel krr_from_json(const Json& j) {
  return KrrModel{kernel_from_json(j.at("kernel")), matrix_from_json(j.at("support_features")),
                  matrix_from_json(j.at("dual_coefficients")), j.at("lambda").get<double>()};
}

inline Json to_json(const DistillConfig& c) {
  Json j;
  j["images_per_class"] = c.images_per_class;
  j["steps"] = c.steps;
  j["lr"] = c.lr;
  j["batch"] = c.batch;
  j["lambda_s"] = c.lambda_s;
  j["lambda_diag"] = c.lambda_diag;
  j["optimize_labels"] = c.optimize_labels;
  j["seed"] = c.seed;
  return j;
}

inline DistillConfig distill_config_from_json(const Json& j) {
  DistillConfig c;
  c.images_per_class = j.value("images_per_class", c.images_per_class);
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.batch = j.value("batch", c.batch);
  c.lambda_s = j.value("lambda_s", c.lambda_s);
  c.lambda_diag = j.value("lambda_diag", c.lambda_diag);
  c.optimize_labels = j.value("optimize_labels", c.optimize_labels);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

inline Json to_json(const RelaxConfig& c) {
  Json j;
  j["rho"] = c.rho;
  j["rho_m"] = c.rho_m;
  j["steps"] = c.steps;
  j["lr"] = c.lr;
  j["batch"] = c.batch;
  j["lambda"] = c.lambda;
  j["transparency"] = c.transparency;
  j["target_class"] = c.target_class;
  j["differentiate_alpha"] = c.differentiate_alpha;
  j["seed"] = c.seed;
  j["distill"] = to_json(c.distill);
  return j;
}

inline RelaxConfig relax_config_from_json(const Json& j) {
  RelaxConfig c;
  c.rho = j.value("rho", c.rho);
  c.rho_m = j.value("rho_m", c.rho_m);
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.batch = j.value("batch", c.batch);
  c.lambda = j.value("lambda", c.lambda);
  c.transparency = j.value("transparency", c.transparency);
  c.target_class = j.value("target_class", c.target_class);
  c.differentiate_alpha = j.value("differentiate_alpha", c.differentiate_alpha);
  c.seed = j.value("seed", c.seed);
  if (j.contains("distill")) c.distill = distill_config_from_json(j.at("distill"));
  c.validate();
  return c;
}

inline Json to_json(const DiagnosticsReport& r) {
  Json j;
  j["conflict_loss"] = r.conflict_loss;
  j["conflict_bound"] = r.conflict_bound;
  j["min_gram_eigenvalue"] = r.min_gram_eigenvalue;
  j["projection_residual_norms"] = r.projection_residual_norms;
  j["projection_bound_rhs"] = r.projection_bound_rhs;
  j["projection_empirical_lhs"] = r.projection_empirical_lhs;
  j["gamma"] = Json{{"d_a", r.gamma_d_a}, {"d_b", r.gamma_d_b}, {"d_tilde", r.gamma_d_tilde}};
  return j;
}

inline void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Malformed(std::string("invalid json in ") + path + ": " + e.what(), 0);
  }
  return j;
}

}  // namespace kipkit
