#include "kaconv/common.hpp"

#include <sstream>

namespace kaconv {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_state: return "invalid-state";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::numeric_failure: return "numeric-failure";
    case ErrorKind::io_error: return "io-error";
    case ErrorKind::unsupported_model: return "unsupported-model";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << " x ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

}  // namespace kaconv
