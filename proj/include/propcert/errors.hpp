#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace propcert {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments: ranges, non-finite entries, malformed files.
class InputError : public Error {
public:
  using Error::Error;
};

class DimensionError : public InputError {
public:
  using InputError::InputError;
};

/// A negative power was requested of an operator whose spectrum dips below 1.
class SpectralFloorError : public Error {
public:
  SpectralFloorError(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

private:
  double eigenvalue_;
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// Integrator step budget exhausted. Carries how far the integration got.
class BudgetError : public Error {
public:
  BudgetError(const std::string& what, long steps, double reached)
      : Error(what), steps_(steps), reached_(reached) {}
  long steps() const noexcept { return steps_; }
  double reached() const noexcept { return reached_; }

private:
  long steps_;
  double reached_;
};

/// A numerical invariant (unitarity, reconstruction) failed beyond tolerance.
class NumericalError : public Error {
public:
  using Error::Error;
};

using WarningHandler = std::function<void(std::string_view)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](std::string_view msg) {
    std::clog << "propcert warning: " << msg << '\n';
  };
  return handler;
}

/// Install once at startup; the handler is not synchronized.
inline void set_warning_handler(WarningHandler handler) {
  warning_handler() = std::move(handler);
}

inline void warn(std::string_view msg) {
  if (auto& h = warning_handler()) h(msg);
}

} // namespace propcert
