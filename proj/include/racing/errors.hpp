#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace racing {

/// Thrown when an evaluation produces a non-finite value; `field` names the
/// quantity that blew up first (a state slot, "cost", "gradient", ...).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string field, std::string what)
      : std::runtime_error(std::move(what)), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace racing
