#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relu_preimage {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Non-finite or otherwise unusable numeric input.
class InvalidInput : public Error {
  public:
    using Error::Error;
};

// Operand shapes do not agree (also used for mismatched model files).
class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

// Spectrum with no singular value above its zero tolerance.
class DegenerateSpectrum : public Error {
  public:
    using Error::Error;
};

// Ill-formed linear program (shape mismatch, lower > upper, non-finite data).
class InvalidProblem : public Error {
  public:
    using Error::Error;
};

// Simplex hit its iteration cap without reaching a verdict.
class SolverStalled : public Error {
  public:
    using Error::Error;
};

// Vector with materially negative entries cannot be a ReLU output.
class NotAReluOutput : public Error {
  public:
    using Error::Error;
};

// The queried activation vector is not in the image of the layer.
class InconsistentOutput : public Error {
  public:
    using Error::Error;
};

// Combinatorial search guard tripped.
class BudgetExceeded : public Error {
  public:
    using Error::Error;
};

// Invariance LP infeasible although the probe point itself is feasible;
// signals tolerance misconfiguration.
class ProbeInfeasible : public Error {
  public:
    using Error::Error;
};

// Zero-norm row where a direction is required.
class DegenerateRow : public Error {
  public:
    using Error::Error;
};

// Correlation sweep invoked with an empty removal set.
class NothingRemoved : public Error {
  public:
    using Error::Error;
};

// Filesystem-level failure; the message carries the path.
class IoError : public Error {
  public:
    using Error::Error;
};

// Malformed file content; carries path and 1-based line number.
class ParseError : public Error {
  public:
    ParseError(std::string path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what),
          path_(std::move(path)),
          line_(line) {}

    const std::string& path() const { return path_; }
    std::size_t line() const { return line_; }

  private:
    std::string path_;
    std::size_t line_;
};

class BadHeader : public ParseError {
  public:
    using ParseError::ParseError;
};

class CountMismatch : public ParseError {
  public:
    using ParseError::ParseError;
};

class NonFiniteValue : public ParseError {
  public:
    using ParseError::ParseError;
};

class UnsupportedActivation : public ParseError {
  public:
    using ParseError::ParseError;
};

}  // namespace relu_preimage
