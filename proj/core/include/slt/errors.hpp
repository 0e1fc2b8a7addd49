#pragma once

#include <stdexcept>
#include <string>

namespace slt {

// A caller-supplied argument violates an operation's precondition. The
// message names the violated requirement.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A configured resource limit or an exact-arithmetic range was exceeded.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pathwise invariant failed. This always indicates a bug.
class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistical procedure received a sample it cannot work with
// (zero variance, too few points).
class DegenerateSampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration text or flags could not be parsed or validated.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}
}  // namespace detail

}  // namespace slt
