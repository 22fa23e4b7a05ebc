#include "vcplm/kernel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vcplm/errors.hpp"

namespace vcplm {

namespace {

constexpr int kMaxMomentOrder = 20;

}  // namespace

double Kernel::operator()(double t) const noexcept {
  switch (family) {
    case KernelFamily::gaussian:
      return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
    case KernelFamily::epanechnikov:
      return std::abs(t) <= 1.0 ? 0.75 * (1.0 - t * t) : 0.0;
    case KernelFamily::uniform:
      return std::abs(t) <= 1.0 ? 0.5 : 0.0;
  }
  return 0.0;
}

double Kernel::support() const noexcept {
  return compact() ? 1.0 : std::numeric_limits<double>::infinity();
}

std::string_view to_string(KernelFamily family) noexcept {
  switch (family) {
    case KernelFamily::gaussian:
      return "gaussian";
    case KernelFamily::epanechnikov:
      return "epanechnikov";
    case KernelFamily::uniform:
      return "uniform";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  if (name == "uniform") return KernelFamily::uniform;
  throw ValidationError("unknown kernel '" + std::string(name) + "'");
}

double kernel_eval(const Kernel& kernel, double u, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InvalidBandwidth(bandwidth);
  return kernel(u / bandwidth) / bandwidth;
}

KernelMoments kernel_moments(const Kernel& kernel, int j, double tolerance) {
  if (j < 0 || j > kMaxMomentOrder)
    throw ValidationError("kernel moment order must lie in [0, " +
                          std::to_string(kMaxMomentOrder) + "]");
  if (j % 2 == 1) return {0.0, 0.0};

  const double lo = kernel.compact() ? -kernel.support() : -std::numeric_limits<double>::infinity();
  const double hi = -lo;
  using boost::math::quadrature::gauss_kronrod;

  auto integrate = [&](auto&& f) {
    double err = 0.0;
    const double value = gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, tolerance, &err);
    if (!std::isfinite(value) || err > std::max(tolerance, tolerance * std::abs(value)) * 10.0)
      throw QuadratureError("kernel moment quadrature did not converge", tolerance);
    return value;
  };
  const double mu = integrate([&](double t) { return std::pow(t, j) * kernel(t); });
  const double nu = integrate([&](double t) {
    const double k = kernel(t);
    return std::pow(t, j) * k * k;
  });
  return {mu, nu};
}

}  // namespace vcplm
