#pragma once

#include <stdexcept>
#include <string>

namespace gf {

enum class ErrorKind {
  malformed_mesh,
  empty_geometry,
  degenerate_object,
  behind_camera,
  no_grasp_found,
  degenerate_grasp,
  degenerate_projection,
  invalid_score,
  invalid_temperature,
  shape_mismatch,
  empty_region,
  insufficient_negatives,
  config,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gf
