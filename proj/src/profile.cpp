#include "vcplm/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vcplm/errors.hpp"
#include "vcplm/wls.hpp"

namespace vcplm {

void Dataset::validate() const {
  const Index rows = y.size();
  if (rows == 0) throw ValidationError("dataset is empty");
  auto check_rows = [&](Index r, const char* name) {
    if (r != rows) {
      std::ostringstream msg;
      msg << "dataset block " << name << " has " << r << " rows, expected " << rows;
      throw ValidationError(msg.str());
    }
  };
  check_rows(eta.rows(), "eta");
  check_rows(v.size(), "V");
  check_rows(w.rows(), "W");
  check_rows(x.rows(), "X");
  check_rows(u.size(), "U");
  if (xi) {
    check_rows(xi->rows(), "xi");
    if (xi->cols() != eta.cols()) throw ValidationError("xi must have as many columns as eta");
  }
  if (p() < 1) throw ValidationError("dataset needs at least one linear covariate (p >= 1)");
  if (q() < 1) throw ValidationError("dataset needs at least one varying-coefficient covariate");
  auto check_finite = [](const auto& block, const char* name) {
    if (!block.allFinite())
      throw ValidationError(std::string("dataset block ") + name + " has non-finite entries");
  };
  check_finite(y, "Y");
  check_finite(eta, "eta");
  check_finite(v, "V");
  check_finite(w, "W");
  check_finite(x, "X");
  check_finite(u, "U");
  if (xi) check_finite(*xi, "xi");
}

Dataset Dataset::select_rows(const std::vector<Index>& rows) const {
  Dataset out;
  out.y = y(rows);
  out.eta = eta(rows, Eigen::all);
  out.v = v(rows);
  out.w = w(rows, Eigen::all);
  out.x = x(rows, Eigen::all);
  out.u = u(rows);
  if (xi) out.xi = Matrix((*xi)(rows, Eigen::all));
  return out;
}

std::string_view to_string(FitMode mode) noexcept {
  switch (mode) {
    case FitMode::proposed:
      return "proposed";
    case FitMode::naive:
      return "naive";
    case FitMode::benchmark:
      return "benchmark";
  }
  return "unknown";
}

FitMode parse_fit_mode(std::string_view name) {
  if (name == "proposed") return FitMode::proposed;
  if (name == "naive") return FitMode::naive;
  if (name == "benchmark") return FitMode::benchmark;
  throw ValidationError("unknown mode '" + std::string(name) + "'");
}

namespace {

void check_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidBandwidth(h);
}

// Kernel weights K_h(U_j - u0) and the local normal matrix D'WD at u0.
struct LocalGram {
  Vector weights;
  Matrix normal;
};

LocalGram local_gram(double u0, const Matrix& x, const Vector& u, double h, const Kernel& kernel) {
  const Index n = x.rows();
  const Index q = x.cols();
  LocalGram g{Vector(n), Matrix::Zero(2 * q, 2 * q)};
  Matrix xx(q, q);
  for (Index j = 0; j < n; ++j) {
    const double t = (u(j) - u0) / h;
    const double wj = kernel(t) / h;
    g.weights(j) = wj;
    if (wj == 0.0) continue;
    xx.noalias() = x.row(j).transpose() * x.row(j);
    g.normal.topLeftCorner(q, q) += wj * xx;
    g.normal.topRightCorner(q, q) += (wj * t) * xx;
    g.normal.bottomRightCorner(q, q) += (wj * t * t) * xx;
  }
  g.normal.bottomLeftCorner(q, q) = g.normal.topRightCorner(q, q).transpose();
  return g;
}

NormalSolver local_solver(const LocalGram& g, double u0, bool regularize) {
  return NormalSolver(g.normal, regularize ? default_ridge(g.normal) : 0.0, u0);
}

// D'W R at u0 for an n x c response block.
Matrix local_rhs(double u0, const Matrix& x, const Vector& u, double h, const Vector& weights,
                 const Matrix& responses) {
  const Index q = x.cols();
  Matrix rhs = Matrix::Zero(2 * q, responses.cols());
  for (Index j = 0; j < x.rows(); ++j) {
    const double wj = weights(j);
    if (wj == 0.0) continue;
    const double t = (u(j) - u0) / h;
    rhs.topRows(q).noalias() += wj * x.row(j).transpose() * responses.row(j);
    rhs.bottomRows(q).noalias() += (wj * t) * x.row(j).transpose() * responses.row(j);
  }
  return rhs;
}

Vector smoother_row_impl(Index i, const Matrix& x, const Vector& u, double h, const Kernel& kernel,
                         bool regularize) {
  const Index n = x.rows();
  const Index q = x.cols();
  const LocalGram g = local_gram(u(i), x, u, h, kernel);
  const NormalSolver solver = local_solver(g, u(i), regularize);
  Vector xi_pad = Vector::Zero(2 * q);
  xi_pad.head(q) = x.row(i).transpose();
  const Vector c = solver.solve(xi_pad);
  Vector row(n);
  for (Index j = 0; j < n; ++j) {
    const double t = (u(j) - u(i)) / h;
    row(j) = g.weights(j) * (x.row(j).dot(c.head(q)) + t * x.row(j).dot(c.tail(q)));
  }
  return row;
}

Matrix orthogonalised(const Matrix& smoother, const Matrix& block) {
  return block - smoother * block;
}

Vector solve_profile(const Matrix& z_tilde, const Vector& y_tilde) {
  const Matrix gram = z_tilde.transpose() * z_tilde;
  const double cond = symmetric_condition(gram);
  if (!(cond <= kMaxCondition)) {
    std::ostringstream msg;
    msg << "collinear covariates: condition estimate of Z~'Z~ is " << cond;
    throw CollinearCovariates(msg.str());
  }
  return z_tilde.colPivHouseholderQr().solve(y_tilde);
}

template <class F>
auto with_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (Error& e) {
    e.set_stage(stage);
    throw;
  }
}

}  // namespace

Vector smoother_row(Index i, const Matrix& x, const Vector& u, double h, const Kernel& kernel,
                    bool regularize) {
  check_bandwidth(h);
  if (x.rows() != u.size()) throw ValidationError("X and U must have the same row count");
  if (i < 0 || i >= x.rows()) throw ValidationError("smoother row index out of range");
  return smoother_row_impl(i, x, u, h, kernel, regularize);
}

Matrix build_smoother(const Matrix& x, const Vector& u, double h, const Kernel& kernel,
                      bool regularize) {
  check_bandwidth(h);
  if (x.rows() != u.size()) throw ValidationError("X and U must have the same row count");
  const Index n = x.rows();
  Matrix s(n, n);
  for (Index i = 0; i < n; ++i) s.row(i) = smoother_row_impl(i, x, u, h, kernel, regularize).transpose();
  return s;
}

Vector fit_theta(const Matrix& z_hat, const Vector& y, const Matrix& smoother) {
  if (z_hat.rows() != y.size() || smoother.rows() != y.size() || smoother.cols() != y.size())
    throw ValidationError("fit_theta: dimension mismatch");
  return solve_profile(orthogonalised(smoother, z_hat), orthogonalised(smoother, y));
}

VaryingEstimate fit_varying(double u0, const Matrix& x, const Vector& u, const Vector& y,
                            const Matrix& z_hat, const Vector& theta, double h,
                            const Kernel& kernel, bool regularize) {
  check_bandwidth(h);
  const Index q = x.cols();
  const LocalGram g = local_gram(u0, x, u, h, kernel);
  const NormalSolver solver = local_solver(g, u0, regularize);
  const Vector partial = y - z_hat * theta;
  const Vector coef = solver.solve(Vector(local_rhs(u0, x, u, h, g.weights, partial).col(0)));
  return {coef.head(q), coef.tail(q) / h};
}

double residual_variance(const Vector& y, const Matrix& z_hat, const Vector& theta,
                         const Matrix& smoother) {
  const Vector partial = y - z_hat * theta;
  const Vector resid = partial - smoother * partial;
  return resid.squaredNorm() / static_cast<double>(y.size());
}

SandwichCovariance sandwich_covariance(const Matrix& z_tilde, double sigma2, const Vector& beta,
                                       const Matrix& e_hat, const Vector& v, double b,
                                       const Kernel& kernel_l) {
  const Index n = z_tilde.rows();
  const Index p = z_tilde.cols();
  const double nn = static_cast<double>(n);
  SandwichCovariance out;
  out.sigma_hat = z_tilde.transpose() * z_tilde / nn;
  out.g_hat = Matrix::Zero(p, p);
  out.b_hat = Matrix::Zero(n, p);

  if (e_hat.size() > 0) {
    check_bandwidth(b);
    if (e_hat.rows() != n || v.size() != n || beta.size() != e_hat.cols())
      throw ValidationError("sandwich covariance: dimension mismatch");
    for (Index i = 0; i < n; ++i) {
      double den = 0.0;
      Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(p);
      for (Index j = 0; j < n; ++j) {
        const double wj = kernel_l((v(j) - v(i)) / b);
        den += wj;
        if (wj != 0.0) num.noalias() += wj * z_tilde.row(j);
      }
      out.b_hat.row(i) = num / den;
    }
    const Vector load = e_hat * beta;
    for (Index i = 0; i < n; ++i)
      out.g_hat.noalias() += (load(i) * load(i)) * out.b_hat.row(i).transpose() * out.b_hat.row(i);
    out.g_hat /= nn;
  }

  const double cond = symmetric_condition(out.sigma_hat);
  if (!(cond <= kMaxCondition)) {
    std::ostringstream msg;
    msg << "collinear covariates: condition estimate of Sigma_hat is " << cond;
    throw CollinearCovariates(msg.str());
  }
  const Eigen::LDLT<Matrix> ldlt(out.sigma_hat);
  const Matrix inv = ldlt.solve(Matrix::Identity(p, p));
  const Matrix left = ldlt.solve(out.g_hat);
  Matrix s1 = sigma2 * inv + ldlt.solve(Matrix(left.transpose())).transpose();
  out.sigma1_hat = 0.5 * (s1 + s1.transpose());
  out.cov_theta = out.sigma1_hat / nn;
  return out;
}

Matrix theta_covariance(const ProfileFit& fit, const Dataset& data, const FitConfig& cfg) {
  const bool calibrated = fit.mode == FitMode::proposed && fit.e_hat.size() > 0;
  const Vector beta = fit.theta.head(data.p1());
  const SandwichCovariance cov =
      calibrated ? sandwich_covariance(fit.z_tilde, fit.sigma2, beta, fit.e_hat, data.v, *fit.b,
                                       cfg.calibration.kernel)
                 : sandwich_covariance(fit.z_tilde, fit.sigma2, beta, Matrix(), data.v, 1.0,
                                       cfg.calibration.kernel);
  return cov.cov_theta;
}

Matrix assemble_z(const Dataset& data, const FitConfig& cfg,
                  std::optional<CalibratedCovariates>* calibrated) {
  Matrix xi_block;
  switch (cfg.mode) {
    case FitMode::proposed:
      if (data.p1() > 0) {
        CalibratedCovariates cal = calibrate_all(data.eta, data.v, cfg.calibration);
        xi_block = cal.xi_hat;
        if (calibrated) *calibrated = std::move(cal);
      } else {
        xi_block.resize(data.n(), 0);
      }
      break;
    case FitMode::naive:
      xi_block = data.eta;
      break;
    case FitMode::benchmark:
      if (!data.xi) throw ValidationError("benchmark mode needs the true xi columns");
      xi_block = *data.xi;
      break;
  }
  Matrix z(data.n(), data.p());
  z << xi_block, data.w;
  return z;
}

ProfileFit fit_pipeline(const Dataset& data, const FitConfig& cfg) {
  data.validate();
  ProfileFit fit;
  fit.mode = cfg.mode;

  std::optional<CalibratedCovariates> cal;
  fit.z_hat = with_stage("calibration", [&] { return assemble_z(data, cfg, &cal); });
  if (cal) {
    fit.b = cal->bandwidth;
    fit.e_hat = cal->residuals;
  }

  fit.h = with_stage("bandwidth", [&] {
    if (cfg.h) {
      check_bandwidth(*cfg.h);
      return *cfg.h;
    }
    const std::vector<double> grid = cfg.cv_grid.empty() ? default_cv_grid(data.u) : cfg.cv_grid;
    return cv_profile(grid, data.x, data.u, data.y, fit.z_hat, cfg.kernel).h;
  });

  fit.smoother = with_stage(
      "smoother", [&] { return build_smoother(data.x, data.u, fit.h, cfg.kernel, cfg.regularize); });
  fit.trace_s = fit.smoother.trace();
  fit.z_tilde = orthogonalised(fit.smoother, fit.z_hat);
  fit.y_tilde = orthogonalised(fit.smoother, data.y);

  fit.theta = with_stage("fit_theta", [&] { return solve_profile(fit.z_tilde, fit.y_tilde); });

  const Vector partial = data.y - fit.z_hat * fit.theta;
  fit.varying_fit = fit.smoother * partial;
  fit.residuals = partial - fit.varying_fit;
  fit.sigma2 = fit.residuals.squaredNorm() / static_cast<double>(data.n());

  with_stage("fit_varying", [&] {
    fit.alpha_u = cfg.alpha_grid.empty()
                      ? default_alpha_grid(data.u, cfg.kernel)
                      : Eigen::Map<const Vector>(cfg.alpha_grid.data(),
                                                 static_cast<Index>(cfg.alpha_grid.size()));
    const Index q = data.q();
    fit.alpha.resize(fit.alpha_u.size(), q);
    fit.dalpha.resize(fit.alpha_u.size(), q);
    for (Index g = 0; g < fit.alpha_u.size(); ++g) {
      const double u0 = fit.alpha_u(g);
      const LocalGram lg = local_gram(u0, data.x, data.u, fit.h, cfg.kernel);
      const NormalSolver solver = local_solver(lg, u0, cfg.regularize);
      const Vector coef =
          solver.solve(Vector(local_rhs(u0, data.x, data.u, fit.h, lg.weights, partial).col(0)));
      fit.alpha.row(g) = coef.head(q).transpose();
      fit.dalpha.row(g) = coef.tail(q).transpose() / fit.h;
    }
    return 0;
  });

  with_stage("theta_covariance", [&] {
    const Vector beta = fit.theta.head(data.p1());
    const SandwichCovariance cov =
        fit.e_hat.size() > 0
            ? sandwich_covariance(fit.z_tilde, fit.sigma2, beta, fit.e_hat, data.v, *fit.b,
                                  cfg.calibration.kernel)
            : sandwich_covariance(fit.z_tilde, fit.sigma2, beta, Matrix(), data.v, 1.0,
                                  cfg.calibration.kernel);
    fit.sigma_hat = cov.sigma_hat;
    fit.sigma1_hat = cov.sigma1_hat;
    fit.cov_theta = cov.cov_theta;
    fit.b_hat = cov.b_hat;
    fit.se_theta = fit.cov_theta.diagonal().cwiseMax(0.0).cwiseSqrt();
    if (fit.e_hat.size() > 0)
      fit.sigma_e_hat = fit.e_hat.transpose() * fit.e_hat / static_cast<double>(data.n());
    return 0;
  });
  return fit;
}

double cv_score(double h, const Matrix& x, const Vector& u, const Vector& y, const Matrix& z_hat,
                const Kernel& kernel) {
  check_bandwidth(h);
  const Index n = x.rows();
  const Index q = x.cols();
  const Index p = z_hat.cols();
  const Index c = p + 1;
  if (n < 3) throw DegenerateSample("cross-validation needs at least three observations");

  // Response block R = [Y, Z_hat].  For every centre j keep the local
  // coefficients m_j = M_j^-1 D_j'W_j R, the smoother weights direction
  // c_j = M_j^-1 (X_j, 0) and G_j = M_j^-1.  Deleting observation i from
  // the fit at j is a rank-one downdate of M_j; by Sherman-Morrison the
  // leave-i-out smooth at j is
  //   (SR)_j + s_ji (d_ji' m_j - R_i) / (1 - lev_ji),
  // with s_ji = w_ji c_j'd_ji and lev_ji = w_ji d_ji' G_j d_ji.
  Matrix r(n, c);
  r << y, z_hat;

  Matrix weights(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) weights(j, i) = kernel((u(i) - u(j)) / h) / h;

  std::vector<Matrix> coef(n);
  std::vector<Matrix> inv(n);
  Matrix cdir(2 * q, n);
  Matrix smooth(n, c);
  for (Index j = 0; j < n; ++j) {
    const LocalGram g = local_gram(u(j), x, u, h, kernel);
    const NormalSolver solver(g.normal, 0.0, u(j));
    coef[j] = solver.solve(local_rhs(u(j), x, u, h, g.weights, r));
    inv[j] = solver.solve(Matrix(Matrix::Identity(2 * q, 2 * q)));
    Vector xpad = Vector::Zero(2 * q);
    xpad.head(q) = x.row(j).transpose();
    cdir.col(j) = solver.solve(xpad);
    smooth.row(j) = xpad.transpose() * coef[j];
  }

  Vector d(2 * q);
  Matrix resid(n, c);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double w = weights(j, i);
      if (w == 0.0) {
        resid.row(j) = r.row(j) - smooth.row(j);
        continue;
      }
      const double t = (u(i) - u(j)) / h;
      d.head(q) = x.row(i).transpose();
      d.tail(q) = t * x.row(i).transpose();
      const double lev = w * d.dot(inv[j] * d);
      if (!(1.0 - lev > 1e-10)) {
        std::ostringstream msg;
        msg << "leave-one-out fit at U=" << u(j) << " is singular without observation " << i;
        throw SingularDesign(msg.str(), std::numeric_limits<double>::infinity(), u(j));
      }
      const double s = w * cdir.col(j).dot(d);
      resid.row(j) = r.row(j) - smooth.row(j) -
                     (s / (1.0 - lev)) * (d.transpose() * coef[j] - r.row(i));
    }
    // Profile least squares without row i, then predict row i.
    Matrix gram = Matrix::Zero(p, p);
    Vector rhs = Vector::Zero(p);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      gram.noalias() += resid.row(j).tail(p).transpose() * resid.row(j).tail(p);
      rhs.noalias() += resid(j, 0) * resid.row(j).tail(p).transpose();
    }
    const double cond = symmetric_condition(gram);
    if (!(cond <= kMaxCondition)) {
      std::ostringstream msg;
      msg << "collinear covariates in leave-one-out fit without observation " << i;
      throw CollinearCovariates(msg.str());
    }
    const Vector theta = gram.ldlt().solve(rhs);
    const double err = resid(i, 0) - resid.row(i).tail(p).dot(theta);
    total += err * err;
  }
  return total / static_cast<double>(n);
}

double cv_score(double h, const Dataset& data, const FitConfig& cfg) {
  data.validate();
  const Matrix z = assemble_z(data, cfg);
  return cv_score(h, data.x, data.u, data.y, z, cfg.kernel);
}

BandwidthSelection cv_profile(const std::vector<double>& grid, const Matrix& x, const Vector& u,
                              const Vector& y, const Matrix& z_hat, const Kernel& kernel) {
  if (grid.empty()) throw ValidationError("bandwidth grid is empty");
  BandwidthSelection out;
  out.grid = grid;
  std::sort(out.grid.begin(), out.grid.end());
  out.scores.assign(out.grid.size(), std::numeric_limits<double>::quiet_NaN());
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  std::optional<CollinearCovariates> collinear;
  bool other_failure = false;
  for (std::size_t g = 0; g < out.grid.size(); ++g) {
    check_bandwidth(out.grid[g]);
    try {
      out.scores[g] = cv_score(out.grid[g], x, u, y, z_hat, kernel);
    } catch (const SingularDesign&) {
      other_failure = true;
      continue;
    } catch (const CollinearCovariates& e) {
      collinear = e;
      continue;
    }
    if (out.scores[g] < best) {
      best = out.scores[g];
      out.h = out.grid[g];
      found = true;
    }
  }
  if (!found && collinear && !other_failure) {
    // Every held-out profile solve was rank deficient: the parametric design
    // itself is collinear, whatever the bandwidth.
    collinear->set_stage("fit_theta");
    throw *collinear;
  }
  if (!found) throw BandwidthSelectionError("cross-validation failed at every grid bandwidth");
  return out;
}

double select_h(const std::vector<double>& grid, const Dataset& data, const FitConfig& cfg) {
  data.validate();
  const Matrix z = assemble_z(data, cfg);
  return cv_profile(grid, data.x, data.u, data.y, z, cfg.kernel).h;
}

std::vector<double> default_cv_grid(const Vector& u, int points) {
  if (points < 1) throw ValidationError("bandwidth grid needs at least one point");
  const double range = u.maxCoeff() - u.minCoeff();
  if (!(range > 0.0)) throw DegenerateSample("U has zero range");
  std::vector<double> grid(points);
  const double lo = std::log(0.02);
  const double hi = std::log(1.0);
  for (int g = 0; g < points; ++g) {
    const double frac = points == 1 ? 1.0 : static_cast<double>(g) / (points - 1);
    grid[g] = range * std::exp(lo + frac * (hi - lo));
  }
  return grid;
}

Vector default_alpha_grid(const Vector& u, const Kernel& kernel, int points) {
  double lo = u.minCoeff();
  double hi = u.maxCoeff();
  if (kernel.compact()) {
    const double trim = 0.025 * (hi - lo);
    lo += trim;
    hi -= trim;
  }
  return Vector::LinSpaced(points, lo, hi);
}

}  // namespace vcplm
