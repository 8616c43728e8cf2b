#ifndef ODMX_ERRORS_HPP
#define ODMX_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace odmx {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Constraint values that admit no nonnegative integer table.
class InfeasibleConstraintsError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// A parameter or margin that a formula divides by is zero.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// A table puts mass where the intensity has none.
class SupportError : public Error {
 public:
  using Error::Error;
};

/// A basis move step would make some cell negative.
class InvalidStepError : public Error {
 public:
  using Error::Error;
};

class IterationLimitError : public Error {
 public:
  IterationLimitError(const std::string& what, std::vector<double> last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

class FiberTooLargeError : public Error {
 public:
  using Error::Error;
};

/// Normalising-constant estimator or signed average without usable weight.
class DegenerateEstimatorError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Too few positive signs for the signed estimator to be trusted.
class SignFractionError : public Error {
 public:
  using Error::Error;
};

}  // namespace odmx

#endif  // ODMX_ERRORS_HPP
