// Shared error types, tolerances and small dense-matrix helpers.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ensync {

// Violation of a documented precondition: bad dimensions, invalid ids,
// inconsistent inputs.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure at runtime: degenerate covariance, unstable simulation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

// Tolerances used across the toolkit.
inline constexpr double kSingularTol = 1e-12;   // condition limit is 1/kSingularTol
inline constexpr double kPsdTol = 1e-9;         // eigenvalues may be this negative
inline constexpr double kNumTol = 1e-9;         // trace and ordering comparisons
inline constexpr double kSmootherJitter = 1e-10;
inline constexpr double kOracleJitter = 1e-12;

// Replace M by (M + M^T)/2. The covariance formulas are algebraically
// symmetric but floating-point evaluation drifts.
inline void symmetrize(Eigen::MatrixXd& m) {
  m = ((m + m.transpose()) * 0.5).eval();
}

// LDLT factorization of a symmetric matrix with a pivot-based condition
// estimate. Callers must check degenerate() before trusting solve().
class SymmetricSolver {
 public:
  explicit SymmetricSolver(const Eigen::MatrixXd& m) : ldlt_(m) {
    if (m.size() == 0 || ldlt_.info() != Eigen::Success) {
      degenerate_ = true;
      return;
    }
    const Eigen::VectorXd d = ldlt_.vectorD();
    const double d_min = d.minCoeff();
    const double d_max = d.maxCoeff();
    positive_definite_ = d_min > 0.0;
    degenerate_ = !positive_definite_ || d_max * kSingularTol > d_min;
    log_det_ = positive_definite_ ? d.array().log().sum()
                                  : -std::numeric_limits<double>::infinity();
  }

  bool degenerate() const { return degenerate_; }
  bool positive_definite() const { return positive_definite_; }
  double log_det() const { return log_det_; }

  template <typename Rhs>
  auto solve(const Rhs& rhs) const {
    return ldlt_.solve(rhs);
  }

 private:
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool degenerate_ = false;
  bool positive_definite_ = false;
  double log_det_ = 0.0;
};

}  // namespace ensync
