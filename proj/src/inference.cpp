#include "vcplm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "vcplm/errors.hpp"
#include "vcplm/parallel.hpp"
#include "vcplm/wls.hpp"

namespace vcplm {

void LinearHypothesis::validate(Index p) const {
  if (a.rows() == 0) throw InvalidHypothesis("hypothesis matrix A has no rows");
  if (a.cols() != p) {
    std::ostringstream msg;
    msg << "hypothesis matrix A has " << a.cols() << " columns, expected p = " << p;
    throw InvalidHypothesis(msg.str());
  }
  if (target.size() != a.rows())
    throw InvalidHypothesis("hypothesis target length must equal the number of rows of A");
  if (a.rows() > p) throw InvalidHypothesis("hypothesis has more rows than parameters");
  if (!a.allFinite() || !target.allFinite())
    throw InvalidHypothesis("hypothesis has non-finite entries");
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& sv = svd.singularValues();
  if (!(sv.minCoeff() > 1e-10 * sv.maxCoeff()))
    throw InvalidHypothesis("hypothesis matrix A is not of full row rank");
}

double chi2_sf(double x, int df) {
  if (!(x > 0.0)) return 1.0;
  const boost::math::chi_squared_distribution<double> dist(df);
  return std::clamp(boost::math::cdf(boost::math::complement(dist, x)), 0.0, 1.0);
}

std::string_view to_string(TestKind kind) noexcept {
  switch (kind) {
    case TestKind::ratio:
      return "ratio";
    case TestKind::wald:
      return "wald";
    case TestKind::glr:
      return "glr";
  }
  return "unknown";
}

TestKind parse_test_kind(std::string_view name) {
  if (name == "ratio") return TestKind::ratio;
  if (name == "wald") return TestKind::wald;
  if (name == "glr") return TestKind::glr;
  throw ValidationError("unknown test '" + std::string(name) + "'");
}

double draw_tau(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return unif(rng) < kTauLowProbability ? kTauLow : kTauHigh;
}

namespace {

Eigen::LDLT<Matrix> checked_ldlt(const Matrix& m, const char* what, bool collinear) {
  const double cond = symmetric_condition(m);
  if (!(cond <= kMaxCondition)) {
    std::ostringstream msg;
    msg << what << " is singular (condition estimate " << cond << ")";
    if (collinear) throw CollinearCovariates(msg.str());
    throw DegenerateCovariance(msg.str());
  }
  return Eigen::LDLT<Matrix>(m);
}

// Everything in the parametric tests that is fixed once Z~ and the
// calibration quantities are known; evaluate() handles any (I - S) Y.
class ParametricEngine {
 public:
  ParametricEngine(const ProfileFit& fit, const LinearHypothesis& hyp) : fit_(fit), hyp_(hyp) {
    hyp_.validate(fit.p());
    n_ = static_cast<double>(fit.n());
    gram_ = checked_ldlt(fit.z_tilde.transpose() * fit.z_tilde, "Z~'Z~", true);
    const Matrix ginv_at = gram_.solve(Matrix(hyp_.a.transpose()));
    const Matrix middle = hyp_.a * ginv_at;
    const auto mid = checked_ldlt(middle, "A (Z~'Z~)^-1 A'", true);
    correction_ = ginv_at * mid.solve(Matrix::Identity(hyp_.rows(), hyp_.rows()));
    // A square A pins theta0 down completely; solve for it directly so the
    // restricted estimate carries no round-off from the projection.
    if (hyp_.rows() == fit.p()) pinned_ = hyp_.a.colPivHouseholderQr().solve(hyp_.target);
    sigma_ = checked_ldlt(fit.sigma_hat, "Sigma_hat", true);
    sigma_inv_ = sigma_.solve(Matrix::Identity(fit.p(), fit.p()));
    a_sinv_at_ = hyp_.a * sigma_inv_ * hyp_.a.transpose();
    calibrated_ = fit.e_hat.size() > 0;
    if (calibrated_) {
      loads_basis_ = fit.e_hat;
      b_outer_.resize(fit.n());
      for (Index i = 0; i < fit.n(); ++i)
        b_outer_[i] = fit.b_hat.row(i).transpose() * fit.b_hat.row(i);
    }
  }

  struct Stats {
    Vector theta;
    Vector theta0;
    double rss0 = 0.0;
    double rss1 = 0.0;
    double sigma2 = 0.0;
    double ratio = 0.0;  // T_n
    Matrix cov;          // covariance of theta_hat
  };

  Stats evaluate(const Vector& y_tilde, bool with_cov) const {
    Stats s;
    s.theta = gram_.solve(Vector(fit_.z_tilde.transpose() * y_tilde));
    s.theta0 = pinned_ ? *pinned_ : Vector(s.theta - correction_ * (hyp_.a * s.theta - hyp_.target));
    s.rss1 = (y_tilde - fit_.z_tilde * s.theta).squaredNorm();
    s.rss0 = (y_tilde - fit_.z_tilde * s.theta0).squaredNorm();
    s.sigma2 = s.rss1 / n_;
    s.ratio = s.rss1 > 0.0 ? 0.5 * n_ * (s.rss0 - s.rss1) / s.rss1 : 0.0;
    if (with_cov) s.cov = covariance(s.theta, s.sigma2);
    return s;
  }

  // Sandwich covariance of theta_hat for given coefficients and sigma2.
  Matrix covariance(const Vector& theta, double sigma2) const {
    const Index p = fit_.p();
    if (!calibrated_) return sigma2 * sigma_inv_ / n_;
    const Vector load = loads_basis_ * theta.head(loads_basis_.cols());
    Matrix g = Matrix::Zero(p, p);
    for (Index i = 0; i < fit_.n(); ++i) g.noalias() += (load(i) * load(i)) * b_outer_[i];
    g /= n_;
    const Matrix sg = sigma_inv_ * g * sigma_inv_;
    const Matrix s1 = sigma2 * sigma_inv_ + 0.5 * (sg + sg.transpose());
    return s1 / n_;
  }

  double wald(const Vector& theta, const Matrix& cov) const {
    const Vector diff = hyp_.a * theta - hyp_.target;
    const Matrix avat = hyp_.a * cov * hyp_.a.transpose();
    const auto ldlt = checked_ldlt(avat, "A V A'", false);
    return diff.dot(ldlt.solve(diff));
  }

  const LinearHypothesis& hyp() const { return hyp_; }
  const Matrix& a_sinv_at() const { return a_sinv_at_; }
  const Matrix& sigma_inv() const { return sigma_inv_; }

 private:
  const ProfileFit& fit_;
  LinearHypothesis hyp_;
  double n_ = 0.0;
  Eigen::LDLT<Matrix> gram_;
  Matrix correction_;  // (Z~'Z~)^-1 A' {A (Z~'Z~)^-1 A'}^-1
  std::optional<Vector> pinned_;  // theta0 when A is square
  Eigen::LDLT<Matrix> sigma_;
  Matrix sigma_inv_;
  Matrix a_sinv_at_;
  bool calibrated_ = false;
  Matrix loads_basis_;
  std::vector<Matrix> b_outer_;
};

// Residual-maker matrices of the GLR alternative and null fits.
class GlrEngine {
 public:
  GlrEngine(const ProfileFit& fit, const Dataset& data, const FitConfig& cfg, const GlrNull& null,
            const Vector& weights) {
    const Index n = data.n();
    const Index q = data.q();
    if (null.constant.empty()) throw ValidationError("GLR null must name at least one coefficient");
    std::vector<bool> is_const(static_cast<std::size_t>(q), false);
    for (Index k : null.constant) {
      if (k < 0 || k >= q) throw ValidationError("GLR null index out of range");
      is_const[static_cast<std::size_t>(k)] = true;
    }
    std::vector<Index> cidx;
    std::vector<Index> vidx;
    for (Index k = 0; k < q; ++k) (is_const[static_cast<std::size_t>(k)] ? cidx : vidx).push_back(k);

    if (weights.size() == 0) {
      weights_ = Vector::Constant(n, 1.0 / static_cast<double>(n));
    } else {
      if (weights.size() != n) throw ValidationError("GLR weights must have length n");
      if (!weights.allFinite() || (weights.array() < 0.0).any())
        throw ValidationError("GLR weights must be finite and nonnegative");
      if (std::abs(weights.sum() - 1.0) > 1e-8) throw ValidationError("GLR weights must sum to 1");
      weights_ = weights;
    }

    const Matrix eye = Matrix::Identity(n, n);
    const Matrix ims1 = eye - fit.smoother;
    const auto g1 = checked_ldlt(fit.z_tilde.transpose() * fit.z_tilde, "Z~'Z~", true);
    resid1_ = ims1 - fit.z_tilde * g1.solve(Matrix(fit.z_tilde.transpose() * ims1));

    Matrix lin(n, fit.p() + static_cast<Index>(cidx.size()));
    lin << fit.z_hat, data.x(Eigen::all, cidx);
    Matrix ims0 = eye;
    if (!vidx.empty()) {
      const Matrix xv = data.x(Eigen::all, vidx);
      ims0 -= build_smoother(xv, data.u, fit.h, cfg.kernel, cfg.regularize);
    }
    const Matrix lin_tilde = ims0 * lin;
    const auto g0 = checked_ldlt(lin_tilde.transpose() * lin_tilde, "null design", true);
    resid0_ = ims0 - lin_tilde * g0.solve(Matrix(lin_tilde.transpose() * ims0));
  }

  struct Stats {
    double rss0;
    double rss1;
    double glr;
  };

  Stats evaluate(const Vector& y) const {
    const Vector r0 = resid0_ * y;
    const Vector r1 = resid1_ * y;
    Stats s{};
    s.rss0 = weights_.dot(r0.cwiseAbs2());
    s.rss1 = weights_.dot(r1.cwiseAbs2());
    s.glr = s.rss1 > 0.0 ? std::max(0.0, (s.rss0 - s.rss1) / s.rss1) : 0.0;
    return s;
  }

  Vector null_mean(const Vector& y) const { return y - resid0_ * y; }
  // Unrestricted residuals divided by their leverage factor sqrt((R1 R1')_ii),
  // so each has variance sigma^2 rather than the shrunken sigma^2 (R1 R1')_ii.
  Vector alt_residuals(const Vector& y) const {
    Vector r = resid1_ * y;
    for (Index i = 0; i < r.size(); ++i) {
      const double lev = resid1_.row(i).squaredNorm();
      if (lev > 1e-10) r(i) /= std::sqrt(lev);
    }
    return r;
  }

 private:
  Vector weights_;
  Matrix resid1_;
  Matrix resid0_;
};

TestResult ratio_result(const ParametricEngine& engine, const ProfileFit& fit,
                        const ParametricEngine::Stats& s, double sigma2) {
  const auto& hyp = engine.hyp();
  const Index l = hyp.rows();
  TestResult r;
  r.test = "ratio";
  r.df = static_cast<int>(l);
  r.rss0 = s.rss0;
  r.rss1 = s.rss1;
  r.statistic = std::max(0.0, s.ratio);

  const Matrix p_mat = sigma2 * engine.a_sinv_at();
  const Matrix q_mat = hyp.a * (fit.cov_theta * static_cast<double>(fit.n())) * hyp.a.transpose();
  const auto p_ldlt = checked_ldlt(p_mat, "sigma2 A Sigma^-1 A'", false);
  const double trace = p_ldlt.solve(q_mat).trace();
  if (!(trace > 0.0)) throw DegenerateCovariance("rho_n trace is not positive");
  r.rho_n = static_cast<double>(l) / trace;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(0.5 * (q_mat + q_mat.transpose()),
                                                       0.5 * (p_mat + p_mat.transpose()),
                                                       Eigen::EigenvaluesOnly);
  r.omega = ges.eigenvalues();
  r.scaled_statistic = 2.0 * r.rho_n * r.statistic;
  r.p_asymptotic = chi2_sf(r.scaled_statistic, r.df);
  const Vector diff = hyp.a * s.theta - hyp.target;
  r.noncentrality = r.rho_n * static_cast<double>(fit.n()) * diff.dot(p_ldlt.solve(diff));
  return r;
}

std::vector<double> tau_vector(std::uint64_t seed, Index replicate, Index n) {
  Rng rng = make_stream(seed, static_cast<std::uint64_t>(replicate));
  std::vector<double> tau(static_cast<std::size_t>(n));
  for (auto& t : tau) t = draw_tau(rng);
  return tau;
}

BootstrapSummary summarise(const BootstrapConfig& boot, double observed,
                           std::vector<double> stats, int failures) {
  if (failures > static_cast<int>(std::floor(0.05 * boot.replicates))) {
    std::ostringstream msg;
    msg << failures << " of " << boot.replicates << " bootstrap replicates failed";
    throw SimulationInstability(msg.str());
  }
  BootstrapSummary out;
  out.replicates = boot.replicates;
  out.seed = boot.seed;
  out.failures = failures;
  const auto valid = static_cast<Index>(stats.size());
  Index exceed = 0;
  for (double s : stats)
    if (s >= observed) ++exceed;
  out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(valid + 1);
  std::vector<double> sorted = stats;
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty()) {
    auto k = static_cast<Index>(std::ceil((1.0 - boot.level) * static_cast<double>(valid)));
    k = std::clamp<Index>(k, 1, valid);
    out.critical_value = sorted[static_cast<std::size_t>(k - 1)];
  }
  out.statistics = std::move(stats);
  return out;
}

void check_boot(const BootstrapConfig& boot) {
  if (boot.replicates < 1) throw ValidationError("bootstrap needs at least one replicate");
  if (!(boot.level > 0.0 && boot.level < 1.0))
    throw ValidationError("bootstrap level must lie in (0, 1)");
}

}  // namespace

RestrictedFit restricted_fit(const ProfileFit& fit, const LinearHypothesis& hyp) {
  const ParametricEngine engine(fit, hyp);
  const auto s = engine.evaluate(fit.y_tilde, false);
  return {s.theta0, s.rss0};
}

TestResult profile_ratio_test(const ProfileFit& fit, const LinearHypothesis& hyp,
                              std::optional<double> sigma2) {
  const ParametricEngine engine(fit, hyp);
  const auto s = engine.evaluate(fit.y_tilde, false);
  return ratio_result(engine, fit, s, sigma2.value_or(fit.sigma2));
}

TestResult wald_test(const ProfileFit& fit, const LinearHypothesis& hyp, WaldCovariance covariance) {
  const ParametricEngine engine(fit, hyp);
  const auto s = engine.evaluate(fit.y_tilde, false);
  Matrix cov = fit.cov_theta;
  if (covariance == WaldCovariance::de_noise) {
    double inflation = fit.sigma2;
    if (fit.sigma_e_hat.size() > 0) {
      const Vector beta = fit.theta.head(fit.sigma_e_hat.rows());
      inflation += beta.dot(fit.sigma_e_hat * beta);
    }
    cov = engine.sigma_inv() * inflation / static_cast<double>(fit.n());
  }
  TestResult r;
  r.test = "wald";
  r.df = static_cast<int>(hyp.rows());
  r.rss0 = s.rss0;
  r.rss1 = s.rss1;
  r.statistic = engine.wald(fit.theta, cov);
  r.scaled_statistic = r.statistic;
  r.rho_n = 1.0;
  r.p_asymptotic = chi2_sf(r.statistic, r.df);
  return r;
}

TestResult glr_test(const ProfileFit& fit, const Dataset& data, const FitConfig& cfg,
                    const GlrNull& null, const Vector& weights) {
  const GlrEngine engine(fit, data, cfg, null, weights);
  const auto s = engine.evaluate(data.y);
  TestResult r;
  r.test = "glr";
  r.statistic = s.glr;
  r.scaled_statistic = s.glr;
  r.rss0 = s.rss0;
  r.rss1 = s.rss1;
  r.df = static_cast<int>(null.constant.size());
  return r;
}

TestResult glr_test(const Dataset& data, const FitConfig& cfg, const GlrNull& null,
                    const Vector& weights) {
  const ProfileFit fit = fit_pipeline(data, cfg);
  return glr_test(fit, data, cfg, null, weights);
}

ParametricBootstrap bootstrap_parametric(const ProfileFit& fit, const Dataset& data,
                                         const FitConfig& cfg, const LinearHypothesis& hyp,
                                         const BootstrapConfig& boot) {
  (void)cfg;
  check_boot(boot);
  const ParametricEngine engine(fit, hyp);
  const auto observed = engine.evaluate(fit.y_tilde, true);
  const Index n = fit.n();

  // Null-restricted mean: Z_hat theta0 + S (Y - Z_hat theta0).
  const Vector partial0 = data.y - fit.z_hat * observed.theta0;
  const Vector mean0 = fit.z_hat * observed.theta0 + fit.smoother * partial0;
  const Matrix ims = Matrix::Identity(n, n) - fit.smoother;

  const auto reps = static_cast<std::size_t>(boot.replicates);
  std::vector<double> ratio(reps), wald(reps);
  std::vector<char> ok(reps, 0);
  parallel_for(boot.replicates, boot.threads, [&](Index k) {
    const auto tau = tau_vector(boot.seed, k, n);
    Vector ystar = mean0;
    for (Index i = 0; i < n; ++i) ystar(i) += tau[static_cast<std::size_t>(i)] * fit.residuals(i);
    try {
      const auto s = engine.evaluate(ims * ystar, true);
      ratio[static_cast<std::size_t>(k)] = std::max(0.0, s.ratio);
      wald[static_cast<std::size_t>(k)] = engine.wald(s.theta, s.cov);
      ok[static_cast<std::size_t>(k)] = 1;
    } catch (const Error&) {
    }
  });
  std::vector<double> rv, wv;
  int failures = 0;
  for (std::size_t k = 0; k < reps; ++k) {
    if (!ok[k]) {
      ++failures;
      continue;
    }
    rv.push_back(ratio[k]);
    wv.push_back(wald[k]);
  }
  const double observed_wald = engine.wald(fit.theta, fit.cov_theta);
  return {summarise(boot, std::max(0.0, observed.ratio), std::move(rv), failures),
          summarise(boot, observed_wald, std::move(wv), failures)};
}

BootstrapSummary wild_bootstrap(TestKind kind, const ProfileFit& fit, const Dataset& data,
                                const FitConfig& cfg, const NullSpec& null,
                                const BootstrapConfig& boot, const Vector& glr_weights) {
  check_boot(boot);
  if (kind == TestKind::glr) {
    const auto* glr_null = std::get_if<GlrNull>(&null);
    if (!glr_null) throw ValidationError("GLR bootstrap needs a GlrNull");
    const GlrEngine engine(fit, data, cfg, *glr_null, glr_weights);
    const double observed = engine.evaluate(data.y).glr;
    const Vector mean0 = engine.null_mean(data.y);
    const Vector resid = engine.alt_residuals(data.y);
    const Index n = data.n();
    const auto reps = static_cast<std::size_t>(boot.replicates);
    std::vector<double> stats(reps);
    std::vector<char> ok(reps, 0);
    parallel_for(boot.replicates, boot.threads, [&](Index k) {
      const auto tau = tau_vector(boot.seed, k, n);
      Vector ystar = mean0;
      for (Index i = 0; i < n; ++i) ystar(i) += tau[static_cast<std::size_t>(i)] * resid(i);
      const auto s = engine.evaluate(ystar);
      if (std::isfinite(s.glr)) {
        stats[static_cast<std::size_t>(k)] = s.glr;
        ok[static_cast<std::size_t>(k)] = 1;
      }
    });
    std::vector<double> valid;
    int failures = 0;
    for (std::size_t k = 0; k < reps; ++k) {
      if (ok[k])
        valid.push_back(stats[k]);
      else
        ++failures;
    }
    return summarise(boot, observed, std::move(valid), failures);
  }
  const auto* hyp = std::get_if<LinearHypothesis>(&null);
  if (!hyp) throw ValidationError("parametric bootstrap needs a LinearHypothesis");
  auto both = bootstrap_parametric(fit, data, cfg, *hyp, boot);
  return kind == TestKind::ratio ? std::move(both.ratio) : std::move(both.wald);
}

BootstrapSummary wild_bootstrap(TestKind kind, const Dataset& data, const FitConfig& cfg,
                                const NullSpec& null, const BootstrapConfig& boot) {
  const ProfileFit fit = fit_pipeline(data, cfg);
  return wild_bootstrap(kind, fit, data, cfg, null, boot);
}

TestResult run_test(TestKind kind, const ProfileFit& fit, const Dataset& data,
                    const FitConfig& cfg, const NullSpec& null,
                    const std::optional<BootstrapConfig>& boot) {
  TestResult r;
  if (kind == TestKind::glr) {
    const auto* glr_null = std::get_if<GlrNull>(&null);
    if (!glr_null) throw ValidationError("GLR test needs a GlrNull");
    r = glr_test(fit, data, cfg, *glr_null);
  } else {
    const auto* hyp = std::get_if<LinearHypothesis>(&null);
    if (!hyp) throw ValidationError("parametric test needs a LinearHypothesis");
    r = kind == TestKind::ratio ? profile_ratio_test(fit, *hyp) : wald_test(fit, *hyp);
  }
  if (boot) {
    r.bootstrap = wild_bootstrap(kind, fit, data, cfg, null, *boot);
    r.p_bootstrap = r.bootstrap->p_value;
  }
  return r;
}

}  // namespace vcplm
