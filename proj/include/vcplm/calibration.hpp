#pragma once

#include <optional>

#include "vcplm/kernel.hpp"
#include "vcplm/types.hpp"

namespace vcplm {

/// Local polynomial calibration of xi(v) = E(eta | V = v).
struct CalibrationConfig {
  int order = 1;                    // local polynomial degree r
  std::optional<double> bandwidth;  // b; nullopt means the rule of thumb
  Kernel kernel{};                  // L
  bool regularize = false;          // opt-in ridge for near-singular windows

  void validate() const;
};

/// Calibrated covariates at the sample points.
struct CalibratedCovariates {
  Matrix xi_hat;     // n x p1, xi_hat(V_i)
  Matrix residuals;  // n x p1, eta_i - xi_hat(V_i)
  int order = 1;
  double bandwidth = 0.0;
  Kernel kernel{};
};

/// Intercept of the order-r local polynomial fit of eta_k on V centred at v0.
double calibrate_at(double v0, const Vector& v, const Vector& eta_k, const CalibrationConfig& cfg);

/// calibrate_at for every column of eta at every V_i.  The bandwidth is
/// resolved once (rule of thumb if unset).  Errors carry the failing row.
CalibratedCovariates calibrate_all(const Matrix& eta, const Vector& v, const CalibrationConfig& cfg);

/// Calibration curve on an arbitrary grid (for plotting).  Columns follow eta.
Matrix calibrate_grid(const Vector& grid, const Matrix& eta, const Vector& v,
                      const CalibrationConfig& cfg);

/// Two-replicate estimator of xi at each evaluation point: a kernel-weighted
/// average of V1 using weights from both V1 and V2.
Vector replicate_calibrate(const Vector& v1, const Vector& v2, double h, const Kernel& kernel,
                           std::optional<Vector> points = std::nullopt);

/// b = sd(V) * n^(-1/3), sd with divisor n - 1.
double rule_of_thumb_b(const Vector& v);

/// Sample standard deviation with divisor n - 1.
double sample_sd(const Vector& values);

}  // namespace vcplm
