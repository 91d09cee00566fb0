#pragma once

#include <stdexcept>
#include <string>

namespace helab {

// Requested (model, bundle) combination or operation is not implemented for a model.
class CapabilityError : public std::runtime_error {
 public:
  explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

// A quadrature rule was too coarse for the requested computation.
class ResolutionError : public std::runtime_error {
 public:
  explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace helab
