#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fredholm {

enum class ErrorKind {
  validation,
  ambient_mismatch,
  ambiguous_boundary,
  ill_conditioned_rank,
  injectivity,
  path_degeneracy,
  unknown_generator,
  invalid_params,
  atlas_failure,
  boundary_zero,
  resolution,
  band_collision,
  structural,
  stabilization,
  range,
  size,
  model_violation,
  parse,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-readable kind so the
/// command line front end can map it to a remediation hint.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace fredholm
