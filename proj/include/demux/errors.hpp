#pragma once

#include <stdexcept>
#include <string>

namespace demux {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or mismatched series lengths.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value fell outside the domain of an operation (log of a non-positive
/// number, exp overflow, saliency outside [-1, 1], ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Optimization diverged (NaN/Inf loss) or produced unusable numbers.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  enum class Kind { EmptyFile, RaggedRows, NonNumeric, InvalidLabels, Io, Invalid };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Problems reading or writing a classifier weight file.
class WeightFileError : public Error {
 public:
  enum class Kind { Io, Corrupt, VersionMismatch, ArchitectureMismatch, DimensionMismatch };

  WeightFileError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace demux
