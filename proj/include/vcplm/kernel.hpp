#pragma once

#include <string>
#include <string_view>

namespace vcplm {

enum class KernelFamily { gaussian, epanechnikov, uniform };

/// A second-order symmetric density kernel.
///
/// Gaussian is the default; the compact families vanish outside [-1, 1].
struct Kernel {
  KernelFamily family = KernelFamily::gaussian;

  /// Unscaled kernel value K(t).
  double operator()(double t) const noexcept;

  /// Half-width of the support; infinity for the Gaussian.
  double support() const noexcept;

  bool compact() const noexcept { return family != KernelFamily::gaussian; }
};

std::string_view to_string(KernelFamily family) noexcept;
KernelFamily parse_kernel_family(std::string_view name);

/// K_h(u) = K(u / h) / h.  Throws InvalidBandwidth unless h > 0.
double kernel_eval(const Kernel& kernel, double u, double bandwidth);

struct KernelMoments {
  double mu;  // int t^j K(t) dt
  double nu;  // int t^j K(t)^2 dt
};

/// Kernel moments by adaptive Gauss-Kronrod quadrature.  Odd moments of the
/// (symmetric) kernels are returned as exact zeros.
KernelMoments kernel_moments(const Kernel& kernel, int j, double tolerance = 1e-10);

}  // namespace vcplm
