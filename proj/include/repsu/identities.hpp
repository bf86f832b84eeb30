#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rpsu {

struct IdentityReport {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  int points = 0;
  bool passed = true;
};

// Shifting the input equals shifting threshold and shift parameters:
// u(x - tau; lambda, xi, mu) == u(x; tau + lambda, xi, tau + mu).
IdentityReport check_translation_identity(int n_random, std::uint64_t seed);

// Scaling the input equals scaling the parameter set:
// u(a x; lambda, xi, mu) == a u(x; lambda/a, a xi, mu/a).
IdentityReport check_scaling_identity(int n_random, std::uint64_t seed);

// Shrink/stretch complement: repsku(x) + repshu(x) == 2x 1l_lambda(x).
IdentityReport check_complement_identity(int n_random, std::uint64_t seed);

// resku(x; 0, xi, 0) == pswish(x, xi) on x >= 0.
IdentityReport check_swish_embedding(int n_random, std::uint64_t seed);

// With xi = 1e4, lambda = mu = 0, resku matches relu within 1e-6 away from
// the kink (|x| > 0.01).
IdentityReport check_relu_limit(int n_random, std::uint64_t seed);

// For lambda >= 0, x >= lambda, alpha in [0,1]: repsku <= repsu <= repshu.
IdentityReport check_ordering(int n_random, std::uint64_t seed);

// Every family member is exactly zero below the threshold.
IdentityReport check_rectification(int n_random, std::uint64_t seed);

// resku_dx tends to 1: |resku_dx(mu + 100/xi) - 1| < 1e-8.
IdentityReport check_asymptotic_derivative(int n_random, std::uint64_t seed);

std::vector<IdentityReport> run_identity_suites(int n_random, std::uint64_t seed);

}  // namespace rpsu
