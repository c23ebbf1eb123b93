// SPDX-License-Identifier: Apache-2.0
//
// Error types shared by all riswsr modules.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace riswsr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix is singular to working precision.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// A matrix does not have full column rank; carries the estimated rank.
class RankError : public Error {
 public:
  RankError(const std::string& what, std::size_t rank) : Error(what), rank_(rank) {}
  std::size_t estimated_rank() const noexcept { return rank_; }

 private:
  std::size_t rank_;
};

/// A value is out of its allowed domain (negative count, NaN, unknown tag...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Configuration file could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// On-disk artifact (dataset, checkpoint) is malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace riswsr
