#include <doctest.h>

#include <cmath>

#include "../support.hpp"
#include "vcplm/errors.hpp"
#include "vcplm/kernel.hpp"
#include "vcplm/wls.hpp"

using namespace vcplm;

namespace {
const Kernel gauss{KernelFamily::gaussian};
const Kernel epan{KernelFamily::epanechnikov};
const Kernel unif{KernelFamily::uniform};
}  // namespace

TEST_SUITE("kernel") {
  TEST_CASE("point evaluations") {
    CHECK(kernel_eval(gauss, 0.0, 1.0) == doctest::Approx(0.3989423).epsilon(1e-7));
    CHECK(kernel_eval(epan, 1.5, 1.0) == 0.0);
    CHECK(kernel_eval(gauss, 0.2, 0.1) == doctest::Approx(0.539910).epsilon(1e-6));
    CHECK(kernel_eval(gauss, 0.2, 0.1) == doctest::Approx(gauss(2.0) / 0.1).epsilon(1e-14));
  }

  TEST_CASE("bandwidth must be positive and finite") {
    CHECK_THROWS_AS(kernel_eval(gauss, 0.0, 0.0), InvalidBandwidth);
    CHECK_THROWS_AS(kernel_eval(gauss, 0.0, -1.0), InvalidBandwidth);
    CHECK_THROWS_AS(kernel_eval(gauss, 0.0, std::nan("")), InvalidBandwidth);
    CHECK_THROWS_AS(kernel_eval(gauss, 0.0, INFINITY), InvalidBandwidth);
  }

  TEST_CASE("moments") {
    CHECK(kernel_moments(gauss, 0).mu == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(kernel_moments(gauss, 1).mu == 0.0);
    CHECK(kernel_moments(gauss, 3).mu == 0.0);
    CHECK(kernel_moments(gauss, 2).mu == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(kernel_moments(gauss, 0).nu == doctest::Approx(1.0 / (2.0 * std::sqrt(M_PI))).epsilon(1e-8));
    CHECK(kernel_moments(epan, 0).nu == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(kernel_moments(epan, 2).mu == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(kernel_moments(unif, 2).mu == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK_THROWS_AS(kernel_moments(gauss, -1), ValidationError);
  }

  TEST_CASE("every kernel integrates to one and is nonnegative") {
    for (const Kernel& k : {gauss, epan, unif}) {
      CHECK(kernel_moments(k, 0).mu == doctest::Approx(1.0).epsilon(1e-6));
      for (double t = -5.0; t <= 5.0; t += 0.01) {
        const double v = k(t);
        CHECK((v >= 0.0 && std::isfinite(v)));
      }
    }
  }

  TEST_CASE("weights over a symmetric point set are symmetric") {
    for (const Kernel& k : {gauss, epan, unif}) {
      for (double u = 0.05; u < 2.0; u += 0.15)
        CHECK(kernel_eval(k, u, 0.7) == kernel_eval(k, -u, 0.7));
    }
  }

  TEST_CASE("family names round-trip") {
    for (auto f : {KernelFamily::gaussian, KernelFamily::epanechnikov, KernelFamily::uniform})
      CHECK(parse_kernel_family(to_string(f)) == f);
    CHECK_THROWS_AS(parse_kernel_family("triweight"), ValidationError);
  }
}

TEST_SUITE("wls") {
  TEST_CASE("square invertible design with unit weights is a direct solve") {
    std::mt19937_64 rng(3);
    const Matrix d = vt::gaussian_matrix(4, 4, rng);
    const Vector y = vt::gaussian_matrix(4, 1, rng);
    const Vector m = solve_wls({d, y, Vector::Ones(4)});
    const Vector direct = d.fullPivLu().solve(y);
    CHECK((m - direct).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("duplicated column is singular without ridge") {
    std::mt19937_64 rng(4);
    Matrix d = vt::gaussian_matrix(10, 3, rng);
    d.col(2) = d.col(0);
    const Vector y = vt::gaussian_matrix(10, 1, rng);
    CHECK_THROWS_AS(solve_wls({d, y, Vector::Ones(10)}), SingularDesign);
    WlsProblem ridged{d, y, Vector::Ones(10), 1e-6};
    CHECK(solve_wls(ridged).allFinite());
  }

  TEST_CASE("random 20x3 problems match explicit normal equations") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 25; ++rep) {
      const Matrix d = vt::gaussian_matrix(20, 3, rng);
      const Vector y = vt::gaussian_matrix(20, 1, rng);
      const Vector w = vt::uniform_vector(20, 0.1, 2.0, rng);
      const Matrix dtw = d.transpose() * w.asDiagonal();
      const Vector oracle = (dtw * d).inverse() * (dtw * y);
      CHECK((solve_wls({d, y, w}) - oracle).cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("input validation") {
    const Matrix d = Matrix::Ones(5, 2);
    CHECK_THROWS_AS(solve_wls({d, Vector::Ones(4), Vector::Ones(5)}), ValidationError);
    CHECK_THROWS_AS(solve_wls({d, Vector::Ones(5), -Vector::Ones(5)}), ValidationError);
  }

  TEST_CASE("condition estimate") {
    CHECK(symmetric_condition(Matrix::Identity(3, 3)) == doctest::Approx(1.0));
    Matrix m = Matrix::Identity(2, 2);
    m(1, 1) = 0.0;
    CHECK(std::isinf(symmetric_condition(m)));
  }
}
