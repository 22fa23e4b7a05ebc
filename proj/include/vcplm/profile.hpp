#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "vcplm/calibration.hpp"
#include "vcplm/kernel.hpp"
#include "vcplm/types.hpp"

namespace vcplm {

/// One observed sample of the model
///   Y   = beta' xi(V) + theta' W + alpha(U)' X + eps
///   eta = xi(V) + e
/// with xi unobserved.  `xi` carries the true values when they are known
/// (simulation), which enables the benchmark estimator.
struct Dataset {
  Vector y;
  Matrix eta;  // n x p1
  Vector v;
  Matrix w;    // n x p2
  Matrix x;    // n x q
  Vector u;
  std::optional<Matrix> xi;  // n x p1

  Index n() const noexcept { return y.size(); }
  Index p1() const noexcept { return eta.cols(); }
  Index p2() const noexcept { return w.cols(); }
  Index p() const noexcept { return eta.cols() + w.cols(); }
  Index q() const noexcept { return x.cols(); }

  /// Throws ValidationError on empty data, mismatched row counts,
  /// p < 1, q < 1 or non-finite entries.
  void validate() const;

  Dataset select_rows(const std::vector<Index>& rows) const;
};

enum class FitMode { proposed, naive, benchmark };

std::string_view to_string(FitMode mode) noexcept;
FitMode parse_fit_mode(std::string_view name);

struct FitConfig {
  std::optional<double> h;          // coefficient bandwidth; nullopt selects it by CV
  std::vector<double> cv_grid;      // empty: default_cv_grid(U, 20)
  Kernel kernel{};                  // K
  CalibrationConfig calibration{};  // r, b and L
  FitMode mode = FitMode::proposed;
  std::vector<double> alpha_grid;   // empty: default_alpha_grid(U, K)
  bool regularize = false;          // opt-in ridge for near-singular local designs
};

/// Result of the profile least-squares fit.  Immutable once returned.
struct ProfileFit {
  FitMode mode = FitMode::proposed;
  double h = 0.0;
  std::optional<double> b;  // calibration bandwidth (proposed mode only)

  Vector theta;       // (beta', theta')'
  Vector se_theta;    // sqrt(diag(cov_theta))
  double sigma2 = 0.0;
  Matrix sigma_hat;   // Z~'Z~ / n
  Matrix sigma1_hat;  // asymptotic covariance of sqrt(n) (theta_hat - theta)
  Matrix cov_theta;   // sigma1_hat / n
  Matrix sigma_e_hat; // p1 x p1, zero-sized outside proposed mode
  Matrix b_hat;       // n x p, B_hat(V_i)

  Vector alpha_u;     // evaluation grid
  Matrix alpha;       // |grid| x q
  Matrix dalpha;      // |grid| x q, derivative block

  Vector residuals;       // Y - Z_hat theta - M_hat
  Vector varying_fit;     // M_hat = S (Y - Z_hat theta)
  double trace_s = 0.0;

  Matrix z_hat;       // n x p
  Matrix z_tilde;     // (I - S) Z_hat
  Vector y_tilde;     // (I - S) Y
  Matrix smoother;    // S
  Matrix e_hat;       // calibration residuals eta - xi_hat (proposed mode)

  Index n() const noexcept { return y_tilde.size(); }
  Index p() const noexcept { return theta.size(); }
};

/// i-th row of the varying-coefficient local-linear smoother S.
Vector smoother_row(Index i, const Matrix& x, const Vector& u, double h, const Kernel& kernel,
                    bool regularize = false);

/// The n x n smoother S, one local-linear solve per row.
Matrix build_smoother(const Matrix& x, const Vector& u, double h, const Kernel& kernel,
                      bool regularize = false);

/// Profile least-squares estimate: OLS of (I - S) Y on (I - S) Z_hat.
Vector fit_theta(const Matrix& z_hat, const Vector& y, const Matrix& smoother);

struct VaryingEstimate {
  Vector a;  // alpha_hat(u)
  Vector b;  // alpha_hat'(u)
};

/// Local-linear varying-coefficient estimate at u of Y - Z_hat theta.
VaryingEstimate fit_varying(double u0, const Matrix& x, const Vector& u, const Vector& y,
                            const Matrix& z_hat, const Vector& theta, double h,
                            const Kernel& kernel, bool regularize = false);

/// sigma2_hat = |(I - S)(Y - Z_hat theta)|^2 / n.
double residual_variance(const Vector& y, const Matrix& z_hat, const Vector& theta,
                         const Matrix& smoother);

struct SandwichCovariance {
  Matrix sigma_hat;   // Z~'Z~ / n
  Matrix g_hat;       // (1/n) sum (e_i' beta)^2 B_i B_i'
  Matrix b_hat;       // n x p
  Matrix sigma1_hat;  // Sigma^-1 (sigma2 Sigma + G) Sigma^-1
  Matrix cov_theta;   // sigma1_hat / n
};

/// Sandwich covariance of theta_hat.  With an empty e_hat the measurement
/// error term vanishes and the result is sigma2 (Z~'Z~)^-1.
SandwichCovariance sandwich_covariance(const Matrix& z_tilde, double sigma2, const Vector& beta,
                                       const Matrix& e_hat, const Vector& v, double b,
                                       const Kernel& kernel_l);

/// Covariance matrix of theta_hat (p x p) for a completed fit.
Matrix theta_covariance(const ProfileFit& fit, const Dataset& data, const FitConfig& cfg);

/// Z_hat for the configured mode.  Fills `calibrated` in proposed mode.
Matrix assemble_z(const Dataset& data, const FitConfig& cfg,
                  std::optional<CalibratedCovariates>* calibrated = nullptr);

/// Full estimation pipeline.  Errors are re-thrown with a stage label
/// (calibration, bandwidth, smoother, fit_theta, fit_varying, theta_covariance).
ProfileFit fit_pipeline(const Dataset& data, const FitConfig& cfg);

/// Exact leave-one-out cross-validation score for h with Z_hat held fixed.
double cv_score(double h, const Matrix& x, const Vector& u, const Vector& y, const Matrix& z_hat,
                const Kernel& kernel);

/// cv_score with Z_hat assembled (and calibrated once) from the dataset.
double cv_score(double h, const Dataset& data, const FitConfig& cfg);

struct BandwidthSelection {
  double h = 0.0;
  std::vector<double> grid;    // ascending
  std::vector<double> scores;  // NaN where the leave-one-out fit failed
};

BandwidthSelection cv_profile(const std::vector<double>& grid, const Matrix& x, const Vector& u,
                              const Vector& y, const Matrix& z_hat, const Kernel& kernel);

/// argmin of CV over the grid, ties to the smaller h.
double select_h(const std::vector<double>& grid, const Dataset& data, const FitConfig& cfg);

/// `points` log-spaced bandwidths spanning [0.02, 1.0] * range(U).
std::vector<double> default_cv_grid(const Vector& u, int points = 20);

/// 101 equispaced points over range(U), trimmed 2.5% per edge for compact kernels.
Vector default_alpha_grid(const Vector& u, const Kernel& kernel, int points = 101);

}  // namespace vcplm
