// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace scramflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, experiment or CLI configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Lattice or tensor index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Operands with incompatible mode counts or block shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Request exceeds a memory or size ceiling (dense rank-6 blocks, Fock images).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A least-squares fit had no well-defined solution.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Every realization of an ensemble was rejected.
class EmptyEnsembleError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary dump or checkpoint file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace scramflow
