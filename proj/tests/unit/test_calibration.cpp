#include <doctest.h>

#include <cmath>

#include "../support.hpp"
#include "vcplm/calibration.hpp"
#include "vcplm/errors.hpp"
#include "vcplm/simulation.hpp"

using namespace vcplm;

TEST_SUITE("calibration") {
  TEST_CASE("local polynomials reproduce polynomials of their own degree") {
    std::mt19937_64 rng(11);
    const Vector v = vt::uniform_vector(80, 0.0, 1.0, rng);
    for (int r = 1; r <= 3; ++r) {
      Vector eta(v.size());
      for (Index i = 0; i < v.size(); ++i) {
        const double t = v(i);
        eta(i) = 2.0 + 3.0 * t - (r >= 2 ? 1.5 * t * t : 0.0) + (r >= 3 ? 0.7 * t * t * t : 0.0);
      }
      CalibrationConfig cfg;
      cfg.order = r;
      for (double b : {0.08, 0.2, 1.0}) {
        cfg.bandwidth = b;
        for (double v0 : {0.2, 0.45, 0.8}) {
          const double truth = 2.0 + 3.0 * v0 - (r >= 2 ? 1.5 * v0 * v0 : 0.0) +
                               (r >= 3 ? 0.7 * v0 * v0 * v0 : 0.0);
          CHECK(std::abs(calibrate_at(v0, v, eta, cfg) - truth) < 1e-9);
        }
      }
    }
  }

  TEST_CASE("local constant reproduces constants") {
    std::mt19937_64 rng(12);
    const Vector v = vt::uniform_vector(50, 0.0, 1.0, rng);
    CalibrationConfig cfg;
    cfg.order = 0;
    cfg.bandwidth = 0.1;
    CHECK(calibrate_at(0.5, v, Vector::Constant(50, 4.25), cfg) == doctest::Approx(4.25));
  }

  TEST_CASE("smooth target on a fine grid") {
    const Index n = 1000;
    Vector v(n), eta(n);
    for (Index i = 0; i < n; ++i) {
      v(i) = static_cast<double>(i) / static_cast<double>(n - 1);
      eta(i) = xi_function(v(i));
    }
    CalibrationConfig cfg;
    cfg.bandwidth = 0.02;
    cfg.kernel.family = KernelFamily::epanechnikov;
    CHECK(std::abs(calibrate_at(0.5, v, eta, cfg) + 0.5) < 0.05);

    // The Gaussian smooth of cos(4 pi v) is damped by exp(-(4 pi b)^2 / 2),
    // about 3% at b = 0.02, so the intercept sits near -0.5 + 0.062.
    cfg.kernel.family = KernelFamily::gaussian;
    const double damp = std::exp(-0.5 * std::pow(4.0 * M_PI * 0.02, 2));
    const double smoothed = 1.5 - 2.0 * damp;
    CHECK(std::abs(calibrate_at(0.5, v, eta, cfg) - smoothed) < 1e-3);
  }

  TEST_CASE("empty window is a singular design") {
    Vector v(4);
    v << 0.0, 0.1, 0.2, 0.3;
    CalibrationConfig cfg;
    cfg.kernel.family = KernelFamily::epanechnikov;
    cfg.bandwidth = 0.05;
    CHECK_THROWS_AS(calibrate_at(0.9, v, Vector::Ones(4), cfg), SingularDesign);
  }

  TEST_CASE("calibrate_all reproduces linear signals and reports the failing row") {
    std::mt19937_64 rng(13);
    const Vector v = vt::uniform_vector(60, 0.0, 1.0, rng);
    Matrix eta(60, 1);
    eta.col(0) = (1.0 - 2.0 * v.array()).matrix();
    CalibrationConfig cfg;
    const auto cal = calibrate_all(eta, v, cfg);
    CHECK((cal.xi_hat - eta).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(cal.residuals.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(cal.bandwidth == doctest::Approx(rule_of_thumb_b(v)));

    Vector v5(5);
    v5 << 0.0, 0.25, 0.5, 0.75, 1.0;
    CalibrationConfig tiny;
    tiny.order = 4;
    tiny.bandwidth = 1e-3;
    CHECK_THROWS_AS(calibrate_all(Matrix::Ones(5, 1), v5, tiny), SingularDesign);
  }

  TEST_CASE("scenario draws calibrate close to the truth") {
    const ScenarioSpec spec = scenario_preset("scenario_iii");
    double worst = 1.0;
    double total = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      Rng rng = make_stream(21, static_cast<std::uint64_t>(rep));
      const SimulatedSample s = gen_dataset(spec, 0.0, rng);
      const auto cal = calibrate_all(s.data.eta, s.data.v, CalibrationConfig{});
      REQUIRE(cal.xi_hat.allFinite());
      const Vector a = cal.xi_hat.col(0).array() - cal.xi_hat.col(0).mean();
      const Vector b = s.xi.array() - s.xi.mean();
      const double corr = a.dot(b) / (a.norm() * b.norm());
      worst = std::min(worst, corr);
      total += corr;
    }
    CHECK(total / 100.0 > 0.9);
    CHECK(worst > 0.85);
  }

  TEST_CASE("replicate calibration") {
    std::mt19937_64 rng(14);
    const Index n = 1000;
    const Vector v = vt::uniform_vector(n, 0.0, 1.0, rng);
    const Vector same = replicate_calibrate(v, v, 0.05, Kernel{});
    double worst = 0.0;
    for (Index i = 0; i < n; ++i)
      if (v(i) > 0.2 && v(i) < 0.8) worst = std::max(worst, std::abs(same(i) - v(i)));
    CHECK(worst < 0.05);

    const Index m = 2000;
    std::normal_distribution<double> z(0.0, 0.3);
    Vector v1(m), v2(m);
    for (Index i = 0; i < m; ++i) {
      v1(i) = 1.7 + z(rng);
      v2(i) = 1.7 + z(rng);
    }
    Vector at(3);
    at << 1.5, 1.7, 1.9;
    const Vector est = replicate_calibrate(v1, v2, 0.2, Kernel{}, at);
    CHECK((est.array() - 1.7).abs().maxCoeff() < 0.1);

    Vector far(1);
    far << 50.0;
    CHECK_THROWS_AS(
        replicate_calibrate(v1, v2, 0.1, Kernel{KernelFamily::epanechnikov}, far), SingularDesign);
  }

  TEST_CASE("rule of thumb bandwidth") {
    // Two-point design with sample sd exactly 1 and n = 1000.
    Vector v(1000);
    for (Index i = 0; i < 1000; ++i) v(i) = (i % 2 == 0 ? 1.0 : -1.0);
    const double sd = sample_sd(v);
    CHECK(rule_of_thumb_b(v) == doctest::Approx(sd * 0.1).epsilon(1e-12));
    v *= 1.0 / sd;
    CHECK(rule_of_thumb_b(v) == doctest::Approx(0.1).epsilon(1e-12));

    std::mt19937_64 rng(15);
    const Vector u = vt::uniform_vector(100, 0.0, 1.0, rng);
    CHECK(std::abs(rule_of_thumb_b(u) - std::pow(100.0, -1.0 / 3.0) / std::sqrt(12.0)) < 0.01);
    CHECK_THROWS_AS(rule_of_thumb_b(Vector::Constant(10, 0.3)), DegenerateSample);
  }

  TEST_CASE("configuration validation") {
    CalibrationConfig cfg;
    cfg.order = -1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.order = 1;
    cfg.bandwidth = 0.0;
    CHECK_THROWS(cfg.validate());
  }
}
