#pragma once

#include <stdexcept>
#include <string>

namespace uird {

enum class ErrorKind {
  Validation,  // bad config or arguments, rejected before work starts
  Parse,       // malformed input file or byte stream
  Io,
  Shape,       // tensor shape mismatch
  Divergence,  // non-finite loss or activations
  Runtime,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace uird
