#ifndef RICOV_CORE_HPP
#define RICOV_CORE_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace ricov {

// Error classes map one-to-one onto CLI exit codes (2, 3, 4).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::string trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::string& trace() const { return trace_; }

 private:
  std::string trace_;
};

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline constexpr double kLog2Pi = 1.8378770664093454836;

// log N(y; mean, var)
inline double log_normal_pdf(double y, double mean, double var) {
  const double d = y - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

}  // namespace ricov

#endif
