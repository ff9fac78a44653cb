#pragma once

#include <stdexcept>
#include <string>

namespace groundfit {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

struct EmptyInput : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };

struct DegenerateInput : Error { using Error::Error; };
struct NoPlaneFound : Error { using Error::Error; };

struct EmptyEval : Error { using Error::Error; };
struct TooFewGroundPoints : Error { using Error::Error; };

struct InvalidSpec : Error { using Error::Error; };

}  // namespace groundfit
