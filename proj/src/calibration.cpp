#include "vcplm/calibration.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "vcplm/errors.hpp"
#include "vcplm/wls.hpp"

namespace vcplm {

void CalibrationConfig::validate() const {
  if (order < 0) throw ValidationError("calibration order must be nonnegative");
  if (bandwidth && (!(*bandwidth > 0.0) || !std::isfinite(*bandwidth)))
    throw InvalidBandwidth(*bandwidth);
}

namespace {

// Local fit with columns ((V - v0) / b)^j; the intercept is unaffected by
// the column scaling and the normal matrix stays well conditioned.
Matrix local_poly_fit(double v0, const Vector& v, const Matrix& responses, int order, double b,
                      const Kernel& kernel, bool regularize) {
  const Index n = v.size();
  const Index m = order + 1;
  Matrix normal = Matrix::Zero(m, m);
  Matrix rhs = Matrix::Zero(m, responses.cols());
  Vector basis(m);
  for (Index i = 0; i < n; ++i) {
    const double t = (v(i) - v0) / b;
    const double w = kernel(t) / b;
    if (w == 0.0) continue;
    basis(0) = 1.0;
    for (Index j = 1; j < m; ++j) basis(j) = basis(j - 1) * t;
    normal.noalias() += w * basis * basis.transpose();
    rhs.noalias() += w * basis * responses.row(i);
  }
  const double ridge = regularize ? default_ridge(normal) : 0.0;
  const NormalSolver solver(normal, ridge, v0);
  return solver.solve(rhs);
}

}  // namespace

double calibrate_at(double v0, const Vector& v, const Vector& eta_k, const CalibrationConfig& cfg) {
  cfg.validate();
  if (v.size() != eta_k.size()) throw ValidationError("V and eta must have the same length");
  const double b = cfg.bandwidth ? *cfg.bandwidth : rule_of_thumb_b(v);
  const Matrix coef = local_poly_fit(v0, v, eta_k, cfg.order, b, cfg.kernel, cfg.regularize);
  return coef(0, 0);
}

CalibratedCovariates calibrate_all(const Matrix& eta, const Vector& v, const CalibrationConfig& cfg) {
  cfg.validate();
  if (v.size() != eta.rows()) throw ValidationError("V and eta must have the same row count");
  const double b = cfg.bandwidth ? *cfg.bandwidth : rule_of_thumb_b(v);
  CalibratedCovariates out;
  out.order = cfg.order;
  out.bandwidth = b;
  out.kernel = cfg.kernel;
  out.xi_hat.resize(eta.rows(), eta.cols());
  for (Index i = 0; i < eta.rows(); ++i) {
    try {
      out.xi_hat.row(i) =
          local_poly_fit(v(i), v, eta, cfg.order, b, cfg.kernel, cfg.regularize).row(0);
    } catch (const SingularDesign& e) {
      std::ostringstream msg;
      msg << "calibration failed at sample " << i << ": " << e.what();
      throw SingularDesign(msg.str(), e.condition(), v(i));
    }
  }
  out.residuals = eta - out.xi_hat;
  return out;
}

Matrix calibrate_grid(const Vector& grid, const Matrix& eta, const Vector& v,
                      const CalibrationConfig& cfg) {
  cfg.validate();
  if (v.size() != eta.rows()) throw ValidationError("V and eta must have the same row count");
  const double b = cfg.bandwidth ? *cfg.bandwidth : rule_of_thumb_b(v);
  Matrix out(grid.size(), eta.cols());
  for (Index g = 0; g < grid.size(); ++g)
    out.row(g) = local_poly_fit(grid(g), v, eta, cfg.order, b, cfg.kernel, cfg.regularize).row(0);
  return out;
}

Vector replicate_calibrate(const Vector& v1, const Vector& v2, double h, const Kernel& kernel,
                           std::optional<Vector> points) {
  if (v1.size() != v2.size()) throw ValidationError("replicates must have the same length");
  if (v1.size() < 2) throw DegenerateSample("replicate calibration needs at least two samples");
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidBandwidth(h);
  const Vector& at = points ? *points : v1;
  Vector out(at.size());
  for (Index g = 0; g < at.size(); ++g) {
    double num = 0.0;
    double den = 0.0;
    for (Index i = 0; i < v1.size(); ++i) {
      const double k2 = kernel_eval(kernel, v2(i) - at(g), h);
      const double k1 = kernel_eval(kernel, v1(i) - at(g), h);
      num += v1(i) * k2 + v1(i) * k1;
      den += k2 + k1;
    }
    if (!(den > 0.0)) {
      std::ostringstream msg;
      msg << "replicate calibration: no kernel mass at " << at(g);
      throw SingularDesign(msg.str(), std::numeric_limits<double>::infinity(), at(g));
    }
    out(g) = num / den;
  }
  return out;
}

double sample_sd(const Vector& values) {
  const Index n = values.size();
  if (n < 2) throw DegenerateSample("standard deviation needs at least two values");
  const double mean = values.mean();
  return std::sqrt((values.array() - mean).square().sum() / static_cast<double>(n - 1));
}

double rule_of_thumb_b(const Vector& v) {
  const double sd = sample_sd(v);
  if (!(sd > 0.0)) throw DegenerateSample("rule-of-thumb bandwidth: V is constant");
  return sd * std::pow(static_cast<double>(v.size()), -1.0 / 3.0);
}

}  // namespace vcplm
