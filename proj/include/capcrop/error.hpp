#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace capcrop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class DegenerateSizeError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class EmptyCaptionError : public Error {
 public:
  using Error::Error;
};

// Raised when an objective returns NaN/inf; carries the offending point.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::array<double, 2> point)
      : Error(what), point_(point) {}
  std::array<double, 2> point() const { return point_; }

 private:
  std::array<double, 2> point_;
};

class ScorerError : public Error {
 public:
  using Error::Error;
};

// Error message sent back by the scorer itself; the connection stays usable.
class ScorerReportedError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class ScorerTimeoutError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class ProtocolError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class DesyncError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class IncompatibleError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace capcrop
