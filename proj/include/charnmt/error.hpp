// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace charnmt {

// Raised for problems in user-supplied data or configuration (missing
// files, malformed corpora, incompatible checkpoints).  The CLI maps it
// to its own exit code, distinct from internal failures.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Raised when training or inference produces non-finite numbers; the
// message names the failing update or input.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace charnmt
