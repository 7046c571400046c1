#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kipkit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// contract violations (CLI exit code 1)
struct DimensionMismatch : Error {
  using Error::Error;
};
struct NonPositiveDefinite : Error {
  using Error::Error;
};
struct NonPsdInput : Error {
  using Error::Error;
};
struct NonFiniteGradient : Error {
  using Error::Error;
};
struct LabelOutOfRange : Error {
  using Error::Error;
};
struct InvalidParam : Error {
  using Error::Error;
};
struct IndexOutOfRange : Error {
  using Error::Error;
};
struct InsufficientData : Error {
  using Error::Error;
};
struct ZeroNormInput : Error {
  using Error::Error;
};
struct InvalidSize : Error {
  using Error::Error;
};
struct EmptyEvaluationSet : Error {
  using Error::Error;
};

// I/O failures (CLI exit code 2)
struct IoError : Error {
  using Error::Error;
};
struct Malformed : IoError {
  Malformed(const std::string& what, std::size_t line)
      : IoError(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  std::size_t line_number;
};

}  // namespace kipkit
