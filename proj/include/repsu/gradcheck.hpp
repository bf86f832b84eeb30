#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "repsu/activations.hpp"

namespace rpsu {

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  std::string worst_point;
  bool passed = true;
  double tolerance = 0.0;
};

// Central difference (f(x+h) - f(x-h)) / 2h. Throws DivergenceError if f
// evaluates to a non-finite value.
double fd_scalar(const std::function<double(double)>& f, double x, double h);

// Five-point fourth-order stencil; larger usable steps push the roundoff
// floor low enough to resolve saturated-tail derivatives.
double fd_scalar4(const std::function<double(double)>& f, double x, double h);

// Default relative step for plain central differences.
inline double fd_step(double x) noexcept { return 1e-6 * std::max(1.0, std::abs(x)); }

// Relative error with a floor guard in the denominator.
inline double rel_error(double analytic, double fd, double guard = 1e-8) noexcept {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), guard});
}

// Checks the analytic input derivative and every learnable-parameter partial
// of `spec` against the fourth-order stencil on the given input grid. Grid
// points closer than the kink guard to lambda or mu are skipped.
GradCheckReport check_activation(const ActivationSpec& spec, std::span<const double> xs,
                                 double tol);

// Parameter grid each family is validated on. Ranges keep the sigmoid-factor
// exponent within the span a double-precision difference quotient can
// resolve at 1e-6; saturation beyond is covered by exact-value unit tests.
std::vector<ActivationSpec> gradcheck_grid(Family f);

// x in [-5, 5], step 0.1.
std::vector<double> default_x_grid();

// Runs every spec of the family's documented grid on the default input grid.
GradCheckReport check_family(Family f, double tol);

class Network;  // see network.hpp

// Compares analytic parameter gradients of the batch loss against central
// differences for n_samples randomly chosen parameter entries (activation
// scalars are always represented when present). Batchnorm running averages
// are restored afterwards.
GradCheckReport check_network(Network& net, const Tensor& images, const std::vector<int>& labels,
                              int n_samples, double tol, std::uint64_t seed);

}  // namespace rpsu
