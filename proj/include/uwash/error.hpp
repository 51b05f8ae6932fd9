#pragma once

#include <stdexcept>
#include <string>

namespace uwash {

// Base of every error raised by the library. `origin` names the module that
// raised it so the CLI can print a single machine-parsable line.
class Error : public std::runtime_error {
 public:
  Error(std::string origin, const std::string& message)
      : std::runtime_error(message), origin_(std::move(origin)) {}

  const std::string& origin() const noexcept { return origin_; }

 private:
  std::string origin_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("nn-engine", message) {}
};

}  // namespace uwash
