#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wgpinn {

/// A precondition of a library call does not hold (shape mismatch, bad range, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A NaN or Inf showed up where a finite number is required.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The gradient tape was asked for a primitive it does not know how to differentiate.
class UnsupportedOperation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wgpinn
