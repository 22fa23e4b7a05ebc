#include "vcplm/simulation.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vcplm/errors.hpp"
#include "vcplm/parallel.hpp"

namespace vcplm {

namespace {

constexpr double kZ975 = 1.959963984540054;
constexpr double kXVariance = 0.8;
const double kWCorrelation = 1.0 / std::sqrt(5.0);

double alpha1_base(double u) { return std::exp(-u * u) + std::sin(std::numbers::pi * u); }

double alpha2_value(double u) { return 0.5 * u * u - std::cos(2.0 * std::numbers::pi * u); }

std::uint64_t stream_id(std::size_t sweep_index, Index replicate) {
  return static_cast<std::uint64_t>(sweep_index) * 1'000'000'007ULL +
         static_cast<std::uint64_t>(replicate);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void check_failures(double sweep, int failed, Index replicates) {
  if (static_cast<double>(failed) > 0.02 * static_cast<double>(replicates)) {
    std::ostringstream msg;
    msg << failed << " of " << replicates << " replicates failed at sweep value " << sweep;
    throw SimulationInstability(msg.str());
  }
}

}  // namespace

void ScenarioSpec::validate() const {
  if (n < 10) throw ValidationError("scenario sample size must be at least 10");
  if (replicates < 1) throw ValidationError("scenario needs at least one replicate");
  if (beta.size() != 3) throw ValidationError("scenario beta must have three entries");
  if (sweep_values.empty()) throw ValidationError("scenario needs at least one sweep value");
  if (!(sigma_eps2 >= 0.0) || !(sigma_e2 >= 0.0))
    throw ValidationError("scenario variances must be nonnegative");
  if (!(v_upper > 0.0) || !(u_upper > 0.0)) throw ValidationError("scenario ranges must be positive");
  if (sweep == SweepKind::snr)
    for (double r : sweep_values)
      if (!(r > 0.0 && r < 1.0)) throw ValidationError("signal-noise ratio must lie in (0, 1)");
  if (sweep == SweepKind::rho && alpha1 != Alpha1Kind::homotopy)
    throw ValidationError("rho sweep requires the homotopy alpha1");
  if (cv_points < 1) throw ValidationError("cv_points must be positive");
  if (h && !(*h > 0.0)) throw InvalidBandwidth(*h);
}

double alpha1_mean() {
  static const double m = [] {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(alpha1_base, 0.0, 3.0, 15, 1e-12) / 3.0;
  }();
  return m;
}

CoefficientValues coeff_functions(double u, double rho) {
  const double m = alpha1_mean();
  const double a1 = alpha1_base(u);
  return {a1, m + rho * (a1 - m), alpha2_value(u), m};
}

double xi_function(double v) { return 3.0 * v - 2.0 * std::cos(4.0 * std::numbers::pi * v); }

double xi_variance(double v_upper) {
  using boost::math::quadrature::gauss_kronrod;
  const double mean =
      gauss_kronrod<double, 61>::integrate(xi_function, 0.0, v_upper, 20, 1e-13) / v_upper;
  const double second = gauss_kronrod<double, 61>::integrate(
                            [](double v) { return xi_function(v) * xi_function(v); }, 0.0,
                            v_upper, 20, 1e-13) /
                        v_upper;
  return second - mean * mean;
}

SimulatedSample gen_dataset(const ScenarioSpec& spec, double sweep_value, Rng& rng) {
  const Index n = spec.n;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector beta = spec.beta;
  double rho = spec.rho;
  double sigma_e2 = spec.sigma_e2;
  switch (spec.sweep) {
    case SweepKind::none:
      break;
    case SweepKind::c:
      beta(1) += sweep_value;
      break;
    case SweepKind::rho:
      rho = sweep_value;
      break;
    case SweepKind::snr:
      sigma_e2 = xi_variance(spec.v_upper) * (1.0 - sweep_value) / sweep_value;
      break;
  }
  const bool homotopy = spec.alpha1 == Alpha1Kind::homotopy;
  const double sd_eps = std::sqrt(spec.sigma_eps2);
  const double sd_e = std::sqrt(sigma_e2);
  const double sd_x = std::sqrt(kXVariance);
  const double w_tail = std::sqrt(1.0 - kWCorrelation * kWCorrelation);

  SimulatedSample s;
  Dataset& d = s.data;
  d.y.resize(n);
  d.eta.resize(n, 1);
  d.v.resize(n);
  d.w.resize(n, 2);
  d.x.resize(n, 2);
  d.u.resize(n);
  s.xi.resize(n);
  s.eps.resize(n);
  s.e.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double v = spec.v_upper * unif(rng);
    const double u = spec.u_upper * unif(rng);
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double x1 = sd_x * normal(rng);
    const double x2 = sd_x * normal(rng);
    const double eps = sd_eps * normal(rng);
    const double e = sd_e * normal(rng);
    const double w1 = z1;
    const double w2 = kWCorrelation * z1 + w_tail * z2;
    const double xi = xi_function(v);
    const auto coefs = coeff_functions(u, rho);
    const double a1 = homotopy ? coefs.alpha1_tilde : coefs.alpha1;
    d.v(i) = v;
    d.u(i) = u;
    d.w(i, 0) = w1;
    d.w(i, 1) = w2;
    d.x(i, 0) = x1;
    d.x(i, 1) = x2;
    d.eta(i, 0) = xi + e;
    d.y(i) = beta(0) * xi + beta(1) * w1 + beta(2) * w2 + a1 * x1 + coefs.alpha2 * x2 + eps;
    s.xi(i) = xi;
    s.eps(i) = eps;
    s.e(i) = e;
  }
  d.xi = Matrix(s.xi);
  s.theta_true = beta;
  return s;
}

std::string method_label(FitMode mode) {
  switch (mode) {
    case FitMode::benchmark:
      return "B";
    case FitMode::proposed:
      return "P";
    case FitMode::naive:
      return "N";
  }
  return "?";
}

FitConfig study_fit_config(const ScenarioSpec& spec, FitMode mode, const Vector& u) {
  FitConfig cfg;
  cfg.mode = mode;
  cfg.h = spec.h;
  if (!spec.h) cfg.cv_grid = default_cv_grid(u, spec.cv_points);
  cfg.alpha_grid = {0.5 * (u.minCoeff() + u.maxCoeff())};
  return cfg;
}

MonteCarloReport run_estimation_study(const ScenarioSpec& spec) {
  spec.validate();
  MonteCarloReport report;
  report.preset = spec.name;
  report.replicates = spec.replicates;
  report.notes = spec.notes;

  struct Record {
    bool ok[3] = {false, false, false};
    Vector theta[3];
    Vector se[3];
    Vector truth;
  };

  for (std::size_t s = 0; s < spec.sweep_values.size(); ++s) {
    const double sweep = spec.sweep_values[s];
    std::vector<Record> records(static_cast<std::size_t>(spec.replicates));
    parallel_for(spec.replicates, spec.threads, [&](Index r) {
      Rng rng = make_stream(spec.seed, stream_id(s, r));
      const SimulatedSample sample = gen_dataset(spec, sweep, rng);
      Record& rec = records[static_cast<std::size_t>(r)];
      rec.truth = sample.theta_true;
      for (int m = 0; m < 3; ++m) {
        try {
          const FitConfig cfg = study_fit_config(spec, kStudyModes[m], sample.data.u);
          const ProfileFit fit = fit_pipeline(sample.data, cfg);
          rec.theta[m] = fit.theta;
          rec.se[m] = fit.se_theta;
          rec.ok[m] = true;
        } catch (const Error&) {
          rec.ok[m] = false;
        }
      }
    });

    int failed = 0;
    for (const auto& rec : records)
      if (!(rec.ok[0] && rec.ok[1] && rec.ok[2])) ++failed;
    report.failures.emplace_back(sweep, failed);
    check_failures(sweep, failed, spec.replicates);

    for (int m = 0; m < 3; ++m) {
      for (Index k = 0; k < 3; ++k) {
        std::vector<double> est, se;
        int covered = 0;
        for (const auto& rec : records) {
          if (!rec.ok[m]) continue;
          const double t = rec.theta[m](k);
          const double sek = rec.se[m](k);
          est.push_back(t);
          se.push_back(sek);
          if (std::abs(t - rec.truth(k)) <= kZ975 * sek) ++covered;
        }
        report.estimation.push_back({sweep, method_label(kStudyModes[m]), static_cast<int>(k + 1),
                                     mean_of(est), mean_of(se), sd_of(est),
                                     est.empty() ? 0.0 : static_cast<double>(covered) / est.size()});
      }
    }
  }
  return report;
}

MonteCarloReport run_power_study(const ScenarioSpec& spec, PowerKind kind,
                                 const BootstrapConfig& boot) {
  spec.validate();
  MonteCarloReport report;
  report.preset = spec.name;
  report.replicates = spec.replicates;
  report.notes = spec.notes;

  // Per method: T_n Aym, T_n Boot, Wald Aym, Wald Boot (parametric) or GLR Boot.
  constexpr int kSlots = 4;
  struct Record {
    bool ok[3] = {false, false, false};
    bool reject[3][kSlots] = {};
  };

  LinearHypothesis hyp{Matrix::Ones(1, 3), Vector::Zero(1)};
  const GlrNull glr_null{{0}};

  for (std::size_t s = 0; s < spec.sweep_values.size(); ++s) {
    const double sweep = spec.sweep_values[s];
    std::vector<Record> records(static_cast<std::size_t>(spec.replicates));
    parallel_for(spec.replicates, spec.threads, [&](Index r) {
      Rng rng = make_stream(spec.seed, stream_id(s, r));
      const SimulatedSample sample = gen_dataset(spec, sweep, rng);
      Record& rec = records[static_cast<std::size_t>(r)];
      for (int m = 0; m < 3; ++m) {
        try {
          const FitConfig cfg = study_fit_config(spec, kStudyModes[m], sample.data.u);
          const ProfileFit fit = fit_pipeline(sample.data, cfg);
          BootstrapConfig b = boot;
          b.threads = 1;
          b.seed = derive_seed(boot.seed ^ spec.seed, stream_id(s, r) * 3 + m);
          if (kind == PowerKind::parametric) {
            const TestResult tr = profile_ratio_test(fit, hyp);
            const TestResult tw = wald_test(fit, hyp);
            const auto bs = bootstrap_parametric(fit, sample.data, cfg, hyp, b);
            rec.reject[m][0] = *tr.p_asymptotic < boot.level;
            rec.reject[m][1] = tr.statistic > bs.ratio.critical_value;
            rec.reject[m][2] = *tw.p_asymptotic < boot.level;
            rec.reject[m][3] = tw.statistic > bs.wald.critical_value;
          } else {
            const TestResult tg = glr_test(fit, sample.data, cfg, glr_null);
            const auto bs = wild_bootstrap(TestKind::glr, fit, sample.data, cfg, glr_null, b);
            rec.reject[m][0] = tg.statistic > bs.critical_value;
          }
          rec.ok[m] = true;
        } catch (const Error&) {
          rec.ok[m] = false;
        }
      }
    });

    int failed = 0;
    for (const auto& rec : records)
      if (!(rec.ok[0] && rec.ok[1] && rec.ok[2])) ++failed;
    report.failures.emplace_back(sweep, failed);
    check_failures(sweep, failed, spec.replicates);

    struct Slot {
      int index;
      const char* test;
      const char* calibration;
    };
    const std::vector<Slot> slots =
        kind == PowerKind::parametric
            ? std::vector<Slot>{{0, "T_n", "Aym"}, {1, "T_n", "Boot"}, {2, "Wald", "Aym"},
                                {3, "Wald", "Boot"}}
            : std::vector<Slot>{{0, "GLR", "Boot"}};
    for (const auto& slot : slots) {
      for (int m = 0; m < 3; ++m) {
        int total = 0;
        int rejected = 0;
        for (const auto& rec : records) {
          if (!rec.ok[m]) continue;
          ++total;
          if (rec.reject[m][slot.index]) ++rejected;
        }
        report.power.push_back({sweep, slot.test, slot.calibration, method_label(kStudyModes[m]),
                                total == 0 ? 0.0 : static_cast<double>(rejected) / total});
      }
    }
  }
  return report;
}

void MonteCarloReport::write_csv(std::ostream& os) const {
  auto sweep_text = [](double v) {
    std::ostringstream s;
    s << std::defaultfloat << std::setprecision(6) << v;
    return s.str();
  };
  os << std::fixed << std::setprecision(6);
  if (!estimation.empty()) {
    os << "sweep,method,coef,est,se,sd,cov\n";
    for (const auto& r : estimation)
      os << sweep_text(r.sweep) << ',' << r.method << ",beta_" << r.coef << ',' << r.est << ','
         << r.se << ',' << r.sd << ',' << r.cov << '\n';
  }
  if (!power.empty()) {
    os << "sweep,test,calibration,method,power\n";
    for (const auto& r : power)
      os << sweep_text(r.sweep) << ',' << r.test << ',' << r.calibration << ',' << r.method << ','
         << r.power << '\n';
  }
}

namespace {

// V range used by the table presets; see scenario_preset.
constexpr double kPresetVUpper = 1.0;

}  // namespace

ScenarioSpec scenario_preset(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  s.v_upper = kPresetVUpper;
  if (name == "scenario_i") {
    s.scenario = Scenario::i;
    s.beta = Vector{{0.0, -1.0, 1.0}};
    s.alpha1 = Alpha1Kind::base;
    s.sweep = SweepKind::c;
    s.sweep_values = {0.0, 0.1, 0.2, 0.25, 0.5, 0.7, 1.0};
  } else if (name == "scenario_ii" || name == "scenario_iii") {
    s.scenario = name == "scenario_ii" ? Scenario::ii : Scenario::iii;
    s.beta = name == "scenario_ii" ? Vector{{0.0, -0.8, 1.0}} : Vector{{0.2, -1.0, 1.0}};
    s.alpha1 = Alpha1Kind::homotopy;
    s.sweep = SweepKind::rho;
    s.sweep_values = {0.0, 0.2, 0.5, 0.7, 1.0};
    s.notes = "rho sweep follows the scenario definition {0, 0.2, 0.5, 0.7, 1}; the published "
              "table lists {0, 0.05, 0.1, 0.15, 0.2, 0.5, 0.7}";
  } else if (name == "scenario_iv") {
    s.scenario = Scenario::iv;
    s.beta = Vector{{0.2, -1.0, 1.0}};
    s.alpha1 = Alpha1Kind::homotopy;
    s.rho = 0.0;
    s.sweep = SweepKind::snr;
    s.sweep_values = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  } else if (name == "table5" || name == "table5_desk") {
    s.scenario = Scenario::custom;
    s.beta = Vector{{0.2, -1.2, 1.0}};
    s.alpha1 = Alpha1Kind::base;
    s.sweep = SweepKind::c;
    s.sweep_values = {0.0, 0.1, 0.2, 0.25, 0.5, 0.7, 1.0};
    if (name == "table5_desk") s.replicates = 200;
  } else if (name == "table6" || name == "table6_desk") {
    s.scenario = Scenario::custom;
    s.beta = Vector{{0.2, -1.0, 1.0}};
    s.alpha1 = Alpha1Kind::homotopy;
    s.sweep = SweepKind::rho;
    s.sweep_values = {0.0, 0.05, 0.1, 0.15, 0.2, 0.5, 0.7};
    if (name == "table6_desk") s.replicates = 200;
  } else {
    throw ValidationError("unknown preset '" + name + "'");
  }
  return s;
}

std::vector<std::string> preset_names() {
  return {"scenario_i", "scenario_ii", "scenario_iii", "scenario_iv",
          "table5",     "table5_desk", "table6",       "table6_desk"};
}

std::optional<PowerKind> preset_power_kind(const std::string& name) {
  if (name == "table5" || name == "table5_desk") return PowerKind::parametric;
  if (name == "table6" || name == "table6_desk") return PowerKind::nonparametric;
  return std::nullopt;
}

}  // namespace vcplm
