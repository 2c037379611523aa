#pragma once

#include <stdexcept>
#include <string>

namespace tacdss {

/// Precondition violated by the caller (shape mismatch, out-of-range value, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A fuzzy cluster lost all of its membership mass, or two centers collapsed.
class DegenerateCluster : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The damped normal matrix could not be factorized.
class SingularMatrix : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two clusters could not be ranked because their latent scores tie.
class AmbiguousOrdering : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scoring was requested without a trained model.
class ModelNotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model, report or dataset file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedVersion : public std::runtime_error {
 public:
  UnsupportedVersion(int found, int supported)
      : std::runtime_error("unsupported model format_version " + std::to_string(found) +
                           " (this build reads version " + std::to_string(supported) + ")"),
        found_(found),
        supported_(supported) {}

  int found() const noexcept { return found_; }
  int supported() const noexcept { return supported_; }

 private:
  int found_;
  int supported_;
};

}  // namespace tacdss
