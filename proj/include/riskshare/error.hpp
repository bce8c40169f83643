#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace riskshare {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (xi <= 0, t outside [0,T], ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A pair or triple of loss models violates the square-integrability conditions.
class InfeasibleModelPair : public Error {
 public:
  InfeasibleModelPair(std::string what, std::size_t first, std::size_t second)
      : Error(std::move(what)), first_(first), second_(second) {}

  std::size_t first() const noexcept { return first_; }
  std::size_t second() const noexcept { return second_; }

 private:
  std::size_t first_;
  std::size_t second_;
};

class DegenerateSample : public Error {
 public:
  using Error::Error;
};

/// Iterative or quadrature routine failed to reach its tolerance.
class NumericalFailure : public Error {
 public:
  NumericalFailure(std::string what, double achieved = 0.0)
      : Error(std::move(what)), achieved_(achieved) {}

  double achieved_tolerance() const noexcept { return achieved_; }

 private:
  double achieved_;
};

class AdmissibilityViolation : public Error {
 public:
  using Error::Error;
};

/// Malformed input files (CSV header, JSON keys, ...).
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-fatal diagnostics (overflowing growth factors, bracket shrinking, ...).
// The handler is process wide; the default writes to stderr.
using WarningHandler = std::function<void(std::string_view)>;

namespace detail {
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
inline WarningHandler& warning_handler() {
  static WarningHandler h = [](std::string_view msg) {
    std::cerr << "riskshare warning: " << msg << '\n';
  };
  return h;
}
}  // namespace detail

inline WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(detail::warning_mutex());
  return std::exchange(detail::warning_handler(), std::move(handler));
}

inline void warn(std::string_view msg) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_handler()) detail::warning_handler()(msg);
}

}  // namespace riskshare
