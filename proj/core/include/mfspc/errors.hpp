#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfspc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class IndexOutOfRange : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// --- manifold fitting -------------------------------------------------------

/// No Phase I point fell inside the contraction ball, even after growing it.
class EmptyNeighborhood : public Error {
 public:
  using Error::Error;
};

/// No Phase I point received positive cylinder weight, even after growing it.
class EmptyCylinder : public Error {
 public:
  using Error::Error;
};

class DegenerateDirection : public Error {
 public:
  using Error::Error;
};

// --- embedding --------------------------------------------------------------

class InvalidK : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// The generalized eigenproblem behind LPP/NPE/PCA cannot be solved reliably,
/// typically because there are fewer Phase I observations than dimensions.
class IllPosed : public Error {
 public:
  IllPosed(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  /// Condition estimate of the right-hand matrix (infinity when unavailable).
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, double smallest_eigenvalue)
      : Error(what), smallest_(smallest_eigenvalue) {}
  double smallest_eigenvalue() const noexcept { return smallest_; }

 private:
  double smallest_;
};

// --- prewhitening -----------------------------------------------------------

class TooShort : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

// --- processes --------------------------------------------------------------

/// The point lies in the kernel of the coordinate projection used by the
/// sphere map, so it has no image on the sphere.
class KernelPoint : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what), row_(row), column_(column) {}
  /// 1-based line number in the file.
  std::size_t row() const noexcept { return row_; }
  /// 1-based column; 0 when the error concerns the whole row.
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

}  // namespace mfspc
