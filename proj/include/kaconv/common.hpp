#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kaconv {

using Scalar = double;
using Index = Eigen::Index;

using ArrayX = Eigen::ArrayXd;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
// Tensor storage is row-major; use this map type when viewing flat buffers as matrices.
using RowMatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatMap = Eigen::Map<RowMatX>;
using ConstRowMatMap = Eigen::Map<const RowMatX>;

enum class ErrorKind {
  invalid_argument,
  invalid_state,
  parse_error,
  numeric_failure,
  io_error,
  unsupported_model,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape);

}  // namespace kaconv
