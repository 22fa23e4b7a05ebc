#pragma once

// Random instances and deliberately naive reference implementations used as
// oracles.  Nothing here shares code with the library's numerics.

#include <random>

#include <Eigen/Dense>

#include "vcplm/kernel.hpp"
#include "vcplm/profile.hpp"

namespace vt {

using vcplm::Index;
using vcplm::Matrix;
using vcplm::Vector;

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

inline Vector uniform_vector(Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Small dataset with p1 = 1, p2 = 2, q = 2 and smooth coefficients.
inline vcplm::Dataset small_dataset(Index n, std::uint64_t seed, double noise = 0.5) {
  std::mt19937_64 rng(seed);
  vcplm::Dataset d;
  d.v = uniform_vector(n, 0.0, 1.0, rng);
  d.u = uniform_vector(n, 0.0, 3.0, rng);
  d.w = gaussian_matrix(n, 2, rng);
  d.x = gaussian_matrix(n, 2, rng);
  const Matrix noise_eps = gaussian_matrix(n, 2, rng);
  Matrix xi(n, 1);
  d.eta.resize(n, 1);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    xi(i, 0) = 3.0 * d.v(i) - 2.0 * std::cos(4.0 * M_PI * d.v(i));
    d.eta(i, 0) = xi(i, 0) + noise * noise_eps(i, 1);
    const double a1 = std::sin(d.u(i));
    const double a2 = 0.5 * d.u(i);
    d.y(i) = 0.3 * xi(i, 0) - d.w(i, 0) + d.w(i, 1) + a1 * d.x(i, 0) + a2 * d.x(i, 1) +
             noise * noise_eps(i, 0);
  }
  d.xi = xi;
  return d;
}

/// Local-linear weights at u0 by explicit normal equations with raw
/// (unstandardised) slope columns and a full-pivot LU solve.
inline Vector brute_smoother_row(double u0, const Vector& xrow, const Matrix& x, const Vector& u,
                                 double h, const vcplm::Kernel& k) {
  const Index n = x.rows();
  const Index q = x.cols();
  Matrix d(n, 2 * q);
  Vector w(n);
  for (Index i = 0; i < n; ++i) {
    d.row(i).head(q) = x.row(i);
    d.row(i).tail(q) = x.row(i) * (u(i) - u0);
    w(i) = k((u(i) - u0) / h) / h;
  }
  const Matrix dtw = d.transpose() * w.asDiagonal();
  const Matrix m = dtw * d;
  Vector e = Vector::Zero(2 * q);
  e.head(q) = xrow;
  const Vector coef_dir = m.fullPivLu().solve(e);
  return dtw.transpose() * coef_dir;
}

inline Matrix brute_smoother(const Matrix& x, const Vector& u, double h, const vcplm::Kernel& k) {
  const Index n = x.rows();
  Matrix s(n, n);
  for (Index i = 0; i < n; ++i)
    s.row(i) = brute_smoother_row(u(i), x.row(i).transpose(), x, u, h, k).transpose();
  return s;
}

inline Matrix drop_row(const Matrix& m, Index r) {
  Matrix out(m.rows() - 1, m.cols());
  for (Index i = 0, k = 0; i < m.rows(); ++i)
    if (i != r) out.row(k++) = m.row(i);
  return out;
}

inline Vector drop_entry(const Vector& v, Index r) {
  Vector out(v.size() - 1);
  for (Index i = 0, k = 0; i < v.size(); ++i)
    if (i != r) out(k++) = v(i);
  return out;
}

/// Literal leave-one-out CV: for each i, refit theta and alpha without
/// observation i and score the prediction of Y_i.
inline double brute_cv(double h, const Matrix& x, const Vector& u, const Vector& y,
                       const Matrix& z, const vcplm::Kernel& k) {
  const Index n = x.rows();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Matrix xm = drop_row(x, i);
    const Vector um = drop_entry(u, i);
    const Vector ym = drop_entry(y, i);
    const Matrix zm = drop_row(z, i);
    const Matrix s = brute_smoother(xm, um, h, k);
    const Matrix id = Matrix::Identity(n - 1, n - 1);
    const Matrix zt = (id - s) * zm;
    const Vector yt = (id - s) * ym;
    const Vector theta = (zt.transpose() * zt).fullPivLu().solve(zt.transpose() * yt);
    const Vector partial = ym - zm * theta;
    const Vector row = brute_smoother_row(u(i), x.row(i).transpose(), xm, um, h, k);
    const double pred = z.row(i).dot(theta) + row.dot(partial);
    total += (y(i) - pred) * (y(i) - pred);
  }
  return total / static_cast<double>(n);
}

}  // namespace vt
