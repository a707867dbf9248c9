#ifndef GEOLM_ERROR_HPP_
#define GEOLM_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geolm {

/// Base of every error raised by the library. The subclasses map onto the
/// CLI's exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed input files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Violated preconditions, shape mismatches, inconsistent configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite losses, undefined distributions.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::size_t index = 0)
      : Error(what), index_(index) {}

  /// Offending example (or batch) index, when the caller supplied one.
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Transient failure of an external lookup; distinct from "no match".
class RetryableError : public Error {
 public:
  using Error::Error;
};

}  // namespace geolm

#endif  // GEOLM_ERROR_HPP_
