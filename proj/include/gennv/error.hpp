// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gennv {

enum class ErrorKind {
  domain,         // argument outside the mathematical domain
  dimension,      // shape / length mismatch
  factorization,  // matrix not positive definite or singular
  data,           // empty or unusable data
  config,         // invalid configuration value
  io,             // file system failure
  format,         // malformed serialized payload
  version,        // serialized payload from an incompatible version
  numeric,        // non-finite value during training
};

std::string_view to_string(ErrorKind kind);

/// Every recoverable failure in the library is reported as an Error. The
/// kind is stable and machine readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gennv
