#pragma once

#include <stdexcept>
#include <string>

#include "svdbf/types.hpp"

namespace svdbf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mismatched dimensions between arguments (angle sets, masks, patch shapes).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scatterer arrives outside the configured temporal window.
class WindowError : public Error {
 public:
  WindowError(Index scatterer, const std::string& what)
      : Error(what), scatterer_(scatterer) {}
  Index scatterer() const { return scatterer_; }

 private:
  Index scatterer_;
};

/// A patch has fewer pixels than transmit angles.
class PatchTooSmallError : public Error {
 public:
  explicit PatchTooSmallError(const std::string& what, Index patch = -1)
      : Error(what), patch_(patch) {}
  Index patch() const { return patch_; }

 private:
  Index patch_;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// A peak or half-maximum crossing falls on or beyond the grid boundary.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

class IOError : public Error {
 public:
  using Error::Error;
};

}  // namespace svdbf
