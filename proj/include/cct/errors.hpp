#ifndef CCT_ERRORS_HPP
#define CCT_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace cct {

// Bad input data (malformed files, missing fields, empty datasets). CLI exit 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric failure (non-finite loss/gradient, failed gradient check). CLI exit 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Value-or-error result for parse-style functions that fail routinely.
template <class T>
class Expected {
 public:
  Expected(T value) : value_(std::move(value)), ok_(true) {}  // NOLINT(google-explicit-constructor)
  static Expected failure(std::string message) {
    Expected e;
    e.error_ = std::move(message);
    return e;
  }

  bool ok() const { return ok_; }
  explicit operator bool() const { return ok_; }

  const T& value() const& {
    if (!ok_) throw DataError(error_);
    return value_;
  }
  T&& value() && {
    if (!ok_) throw DataError(error_);
    return std::move(value_);
  }
  const std::string& error() const { return error_; }

 private:
  Expected() : value_(), ok_(false) {}
  T value_;
  bool ok_;
  std::string error_;
};

}  // namespace cct

#endif  // CCT_ERRORS_HPP
