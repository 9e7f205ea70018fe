#pragma once

#include <stdexcept>
#include <string>

namespace pottslab {

// Bad input: malformed matrix, out-of-range parameter, unparsable file.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation would exceed a configured size limit.
class GuardViolation : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

inline void guard(bool ok, const std::string& what) {
  if (!ok) throw GuardViolation(what);
}

}  // namespace pottslab
