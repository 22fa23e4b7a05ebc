#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vcplm/profile.hpp"
#include "vcplm/random.hpp"
#include "vcplm/types.hpp"

namespace vcplm {

/// H0: A theta = target, A of full row rank l <= p.
struct LinearHypothesis {
  Matrix a;
  Vector target;

  Index rows() const noexcept { return a.rows(); }
  /// Throws InvalidHypothesis on a width mismatch or rank deficiency
  /// (singular values below 1e-10 |A|).
  void validate(Index p) const;
};

/// Homogeneity null for the varying coefficients: the listed (0-based)
/// coefficient functions are constant.  Listing every index gives the
/// fully parametric null.
struct GlrNull {
  std::vector<Index> constant;
};

struct BootstrapConfig {
  int replicates = 500;
  double level = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct BootstrapSummary {
  int replicates = 0;
  std::uint64_t seed = 0;
  double critical_value = 0.0;  // empirical (1 - level) quantile
  double p_value = 1.0;         // (1 + #{stat* >= stat}) / (B + 1)
  int failures = 0;
  std::vector<double> statistics;
};

struct TestResult {
  std::string test;  // "ratio", "wald" or "glr"
  double statistic = 0.0;
  double scaled_statistic = 0.0;  // 2 rho_n T_n for the ratio test
  double rho_n = 1.0;
  Vector omega;                   // eigenvalues of (s2 A S^-1 A')^-1 (A S1 A')
  int df = 0;
  std::optional<double> p_asymptotic;
  std::optional<double> p_bootstrap;
  double rss0 = 0.0;
  double rss1 = 0.0;
  double noncentrality = 0.0;     // plug-in diagnostic for the ratio test
  std::optional<BootstrapSummary> bootstrap;
};

struct RestrictedFit {
  Vector theta0;
  double rss0 = 0.0;
};

/// Constrained profile least squares: theta0 minimises |Y~ - Z~ t|^2 subject to A t = target.
RestrictedFit restricted_fit(const ProfileFit& fit, const LinearHypothesis& hyp);

/// Profile least-squares ratio test T_n = (n/2)(RSS0 - RSS1)/RSS1 with the
/// rho_n scaling making 2 rho_n T_n approximately chi-squared(l).
/// `sigma2` defaults to the fit's sigma2_hat.
TestResult profile_ratio_test(const ProfileFit& fit, const LinearHypothesis& hyp,
                              std::optional<double> sigma2 = std::nullopt);

enum class WaldCovariance {
  sandwich,  // the fit's sandwich covariance
  de_noise,  // Sigma^-1 (sigma2 + beta' Sigma_e beta) / n
};

/// W_n = (A theta - c)' (A V A')^-1 (A theta - c).
TestResult wald_test(const ProfileFit& fit, const LinearHypothesis& hyp,
                     WaldCovariance covariance = WaldCovariance::sandwich);

/// Generalized likelihood ratio statistic (RSS(H0) - RSS(H1)) / RSS(H1) for a
/// constant-coefficient null.  Empty weights mean w_i = 1/n.  No asymptotic
/// p-value; use wild_bootstrap.
TestResult glr_test(const ProfileFit& fit, const Dataset& data, const FitConfig& cfg,
                    const GlrNull& null, const Vector& weights = Vector());
TestResult glr_test(const Dataset& data, const FitConfig& cfg, const GlrNull& null,
                    const Vector& weights = Vector());

/// Two-point wild bootstrap multiplier with E tau = 0, E tau^2 = E tau^3 = 1.
double draw_tau(Rng& rng);

inline constexpr double kTauLow = -0.6180339887498949;   // -(sqrt5 - 1)/2
inline constexpr double kTauHigh = 1.6180339887498949;   // (sqrt5 + 1)/2
inline constexpr double kTauLowProbability = 0.7236067977499790;  // (sqrt5 + 1)/(2 sqrt5)

enum class TestKind { ratio, wald, glr };

using NullSpec = std::variant<LinearHypothesis, GlrNull>;

/// Wild bootstrap calibration of a test statistic.  Bootstrap responses are
/// the null-restricted fitted mean plus tau_i times the unrestricted
/// residuals; Z_hat, X, U and the bandwidths stay fixed.  Replicate k draws
/// from stream k of the configured seed, so the result does not depend on
/// the thread count.
BootstrapSummary wild_bootstrap(TestKind kind, const ProfileFit& fit, const Dataset& data,
                                const FitConfig& cfg, const NullSpec& null,
                                const BootstrapConfig& boot, const Vector& glr_weights = Vector());

/// Fits the data first, then bootstraps.
BootstrapSummary wild_bootstrap(TestKind kind, const Dataset& data, const FitConfig& cfg,
                                const NullSpec& null, const BootstrapConfig& boot);

/// Ratio and Wald bootstrap summaries from one shared set of bootstrap samples.
struct ParametricBootstrap {
  BootstrapSummary ratio;
  BootstrapSummary wald;
};

ParametricBootstrap bootstrap_parametric(const ProfileFit& fit, const Dataset& data,
                                         const FitConfig& cfg, const LinearHypothesis& hyp,
                                         const BootstrapConfig& boot);

/// Runs the test (with bootstrap calibration when boot is set) in one call.
TestResult run_test(TestKind kind, const ProfileFit& fit, const Dataset& data,
                    const FitConfig& cfg, const NullSpec& null,
                    const std::optional<BootstrapConfig>& boot);

std::string_view to_string(TestKind kind) noexcept;
TestKind parse_test_kind(std::string_view name);

/// Upper-tail chi-squared probability.
double chi2_sf(double x, int df);

}  // namespace vcplm
