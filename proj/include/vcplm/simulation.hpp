#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vcplm/inference.hpp"
#include "vcplm/profile.hpp"
#include "vcplm/random.hpp"

namespace vcplm {

/// Monte Carlo designs built on
///   Y   = b1 xi(V) + b2 W1 + b3 W2 + a1(U) X1 + a2(U) X2 + eps,
///   eta = xi(V) + e,  xi(v) = 3v - 2 cos(4 pi v).
enum class Scenario { i, ii, iii, iv, custom };
enum class Alpha1Kind {
  base,      // exp(-u^2) + sin(pi u)
  homotopy,  // m + rho (alpha1(u) - m)
};
enum class SweepKind {
  none,
  c,    // added to beta_2
  rho,  // homotopy parameter of alpha1
  snr,  // signal-noise ratio r; sigma_e2 = var(xi) (1 - r) / r
};

struct ScenarioSpec {
  std::string name = "custom";
  Scenario scenario = Scenario::custom;
  Index n = 100;
  Index replicates = 500;
  Vector beta = Vector::Zero(3);
  Alpha1Kind alpha1 = Alpha1Kind::base;
  double rho = 1.0;  // used with homotopy when rho is not swept
  SweepKind sweep = SweepKind::none;
  std::vector<double> sweep_values{0.0};
  double sigma_eps2 = 1.0;
  double sigma_e2 = 2.0;
  double v_upper = 1.0;     // V ~ U[0, v_upper]
  double u_upper = 3.0;     // U ~ U[0, u_upper]
  std::uint64_t seed = 0;
  int cv_points = 10;       // per-replicate CV grid size (20 restores the full grid)
  std::optional<double> h;  // fixed coefficient bandwidth (skips CV)
  int threads = 1;
  std::string notes;

  void validate() const;
};

/// alpha1, alpha1-tilde, alpha2 and m at u.
struct CoefficientValues {
  double alpha1;
  double alpha1_tilde;
  double alpha2;
  double m;
};

CoefficientValues coeff_functions(double u, double rho);

/// m = (1/3) int_0^3 alpha1(t) dt, by adaptive quadrature (computed once).
double alpha1_mean();

/// xi(v) = 3v - 2 cos(4 pi v).
double xi_function(double v);

/// Var{xi(V)} for V ~ U[0, v_upper], by quadrature.
double xi_variance(double v_upper);

struct SimulatedSample {
  Dataset data;  // includes the true xi for the benchmark estimator
  Vector theta_true;
  Vector xi;
  Vector eps;
  Vector e;
};

/// One draw of the design at a sweep value.
SimulatedSample gen_dataset(const ScenarioSpec& spec, double sweep_value, Rng& rng);

struct EstimationRow {
  double sweep;
  std::string method;  // B, P, N
  int coef;            // 1-based
  double est;
  double se;
  double sd;
  double cov;
};

struct PowerRow {
  double sweep;
  std::string test;         // T_n, Wald, GLR
  std::string calibration;  // Aym, Boot
  std::string method;
  double power;
};

struct MonteCarloReport {
  std::string preset;
  Index replicates = 0;
  std::vector<EstimationRow> estimation;
  std::vector<PowerRow> power;
  std::vector<std::pair<double, int>> failures;  // (sweep, failed replicate fits)
  std::string notes;

  void write_csv(std::ostream& os) const;
};

/// Est/SE/SD/COV of the three estimators over replicates at each sweep value.
MonteCarloReport run_estimation_study(const ScenarioSpec& spec);

enum class PowerKind { parametric, nonparametric };

/// Rejection rates at the bootstrap level for the parametric tests (T_n and
/// Wald of A = (1,1,1), target 0) or the GLR test of constant alpha1.
MonteCarloReport run_power_study(const ScenarioSpec& spec, PowerKind kind,
                                 const BootstrapConfig& boot);

/// Named presets: scenario_i .. scenario_iv, table5, table5_desk, table6,
/// table6_desk.  Throws ValidationError for unknown names.
ScenarioSpec scenario_preset(const std::string& name);
std::vector<std::string> preset_names();

/// Whether a preset is a power study, and which kind.
std::optional<PowerKind> preset_power_kind(const std::string& name);

/// Method labels and fit modes in report order.
inline constexpr FitMode kStudyModes[3] = {FitMode::benchmark, FitMode::proposed, FitMode::naive};
std::string method_label(FitMode mode);

/// Fit configuration used for one replicate of a study.
FitConfig study_fit_config(const ScenarioSpec& spec, FitMode mode, const Vector& u);

}  // namespace vcplm
