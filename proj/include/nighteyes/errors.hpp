#pragma once

#include <stdexcept>
#include <string>

namespace nighteyes {

/// Base class for all library errors.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Point set with fewer than two points or zero spread.
class DegenerateSet : public Error {
   public:
    using Error::Error;
};

/// Three source points that are (nearly) collinear.
class DegenerateTriplet : public Error {
   public:
    using Error::Error;
};

class LengthMismatch : public Error {
   public:
    using Error::Error;
};

/// Constellations passed to template construction disagree on LED ids.
class InconsistentLedIds : public Error {
   public:
    using Error::Error;
};

/// A record or parameter failed validation.
class ValidationError : public Error {
   public:
    using Error::Error;
};

/// Configuration could not be parsed or contains unknown keys.
class ConfigError : public Error {
   public:
    using Error::Error;
};

/// Dataset root contained no processable frames.
class NoFramesError : public Error {
   public:
    using Error::Error;
};

}  // namespace nighteyes
