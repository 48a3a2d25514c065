// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace perbranch {

/// Small vectors in R^d (d = 1 or 2) and grid functions share one type.
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using GridFunction = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inadmissible problem configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain an operation supports (dimension mismatch,
/// unreachable velocity, index out of range).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Time stepping produced growth beyond the admissible envelope.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// A computation or run is unusable (censoring, inconsistent inputs).
class RunError : public Error {
 public:
  using Error::Error;
};

}  // namespace perbranch
