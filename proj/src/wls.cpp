#include "vcplm/wls.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "vcplm/errors.hpp"

namespace vcplm {

double default_ridge(const Matrix& normal) {
  if (normal.rows() == 0) return 0.0;
  return 1e-8 * normal.trace() / static_cast<double>(normal.rows());
}

double symmetric_condition(const Matrix& normal) {
  if (normal.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normal, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(hi > 0.0) || !(lo > 0.0) || !std::isfinite(hi)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

NormalSolver::NormalSolver(const Matrix& normal, double ridge, std::optional<double> location)
    : size_(normal.rows()) {
  if (normal.rows() != normal.cols()) throw ValidationError("normal matrix must be square");
  if (ridge < 0.0 || !std::isfinite(ridge)) throw ValidationError("ridge must be nonnegative");
  Matrix regularised = normal;
  regularised.diagonal().array() += ridge;
  condition_ = symmetric_condition(regularised);
  if (ridge == 0.0 && !(condition_ <= kMaxCondition)) {
    std::ostringstream msg;
    msg << "singular design: condition estimate " << condition_ << " exceeds " << kMaxCondition;
    if (location) msg << " at " << *location;
    throw SingularDesign(msg.str(), condition_, location);
  }
  if (!std::isfinite(condition_)) {
    throw SingularDesign("singular design even after ridge", condition_, location);
  }
  ldlt_.compute(regularised);
  if (ldlt_.info() != Eigen::Success)
    throw SingularDesign("LDLT factorisation failed", condition_, location);
}

Matrix NormalSolver::solve(const Matrix& rhs) const { return ldlt_.solve(rhs); }

Vector NormalSolver::solve(const Vector& rhs) const { return ldlt_.solve(rhs); }

Vector solve_wls(const WlsProblem& problem) {
  const Index n = problem.design.rows();
  const Index m = problem.design.cols();
  if (problem.response.size() != n || problem.weights.size() != n)
    throw ValidationError("WLS design, response and weights must share a row count");
  if (m == 0) throw ValidationError("WLS design has no columns");
  if (!problem.weights.allFinite() || (problem.weights.array() < 0.0).any())
    throw ValidationError("WLS weights must be finite and nonnegative");
  const Matrix weighted = problem.design.transpose() * problem.weights.asDiagonal();
  const Matrix normal = weighted * problem.design;
  const NormalSolver solver(normal, problem.ridge);
  return solver.solve(Vector(weighted * problem.response));
}

}  // namespace vcplm
