#pragma once

#include <optional>

#include "vcplm/types.hpp"

namespace vcplm {

/// Largest condition number of a normal matrix accepted without a ridge.
inline constexpr double kMaxCondition = 1e12;

/// Weighted least squares: argmin sum_i w_i (y_i - d_i' a)^2 + ridge * |a|^2.
struct WlsProblem {
  Matrix design;
  Vector response;
  Vector weights;
  double ridge = 0.0;
};

/// The opt-in regularisation used for near-singular local designs:
/// 1e-8 * trace(normal) / m.
double default_ridge(const Matrix& normal);

/// Factorisation of a symmetric positive semidefinite normal matrix D'WD.
///
/// Uses a pivoted LDL' decomposition; the condition number is checked from
/// the spectrum before factorising, and with ridge == 0 anything above
/// kMaxCondition raises SingularDesign.
class NormalSolver {
 public:
  NormalSolver(const Matrix& normal, double ridge = 0.0,
               std::optional<double> location = std::nullopt);

  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;

  double condition() const noexcept { return condition_; }
  Index size() const noexcept { return size_; }

 private:
  Eigen::LDLT<Matrix> ldlt_;
  double condition_ = 0.0;
  Index size_ = 0;
};

/// Condition number of a symmetric matrix (lambda_max / lambda_min, or
/// infinity when lambda_min <= 0).
double symmetric_condition(const Matrix& normal);

Vector solve_wls(const WlsProblem& problem);

}  // namespace vcplm
