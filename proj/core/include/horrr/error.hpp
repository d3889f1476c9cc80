// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace horrr {

// Dimension or argument mismatch. Maps to CLI exit code 1.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure: singular solves, rank deficiency, line-search breakdown.
// Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A core unfolding dropped rank: the point sits on the boundary of the
// fixed-rank manifold and the pseudo-inverse is not trustworthy.
class BoundaryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace horrr
