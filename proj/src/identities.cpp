#include "repsu/identities.hpp"

#include <algorithm>
#include <cmath>

#include "repsu/activations.hpp"
#include "repsu/rng.hpp"

namespace rpsu {

namespace {

ActivationParams resku_params(double lambda, double xi, double mu) {
  ActivationParams p;
  p.lambda = lambda;
  p.xi = xi;
  p.mu = mu;
  return p;
}

IdentityReport finish(IdentityReport r) {
  r.passed = r.max_error <= r.tolerance;
  return r;
}

}  // namespace

IdentityReport check_translation_identity(int n_random, std::uint64_t seed) {
  IdentityReport r{"translation-identity", 0.0, 1e-12, n_random, true};
  Rng rng(seed);
  for (int i = 0; i < n_random; ++i) {
    const double x = rng.uniform(-8.0, 8.0);
    const double tau = rng.uniform(-3.0, 3.0);
    const double lambda = rng.uniform(-2.0, 2.0);
    const double xi = rng.uniform(0.1, 4.0);
    const double mu = rng.uniform(-2.0, 2.0);
    const double lhs = resku(x - tau, resku_params(lambda, xi, mu));
    const double rhs = resku(x, resku_params(tau + lambda, xi, tau + mu));
    r.max_error = std::max(r.max_error, std::abs(lhs - rhs));
  }
  return finish(r);
}

IdentityReport check_scaling_identity(int n_random, std::uint64_t seed) {
  IdentityReport r{"scaling-identity", 0.0, 1e-12, n_random, true};
  Rng rng(seed);
  for (int i = 0; i < n_random; ++i) {
    const double x = rng.uniform(-8.0, 8.0);
    const double a = rng.uniform(0.1, 8.0);
    const double lambda = rng.uniform(-2.0, 2.0);
    const double xi = rng.uniform(0.1, 4.0);
    const double mu = rng.uniform(-2.0, 2.0);
    const double lhs = resku(a * x, resku_params(lambda, xi, mu));
    const double rhs = a * resku(x, resku_params(lambda / a, a * xi, mu / a));
    const double denom = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    r.max_error = std::max(r.max_error, std::abs(lhs - rhs) / denom);
  }
  return finish(r);
}

IdentityReport check_complement_identity(int n_random, std::uint64_t seed) {
  IdentityReport r{"shrink-stretch-complement", 0.0, 1e-12, n_random, true};
  Rng rng(seed);
  for (int i = 0; i < n_random; ++i) {
    ActivationParams p;
    p.lambda = rng.uniform(-2.0, 2.0);
    p.sigma = rng.uniform(0.3, 3.0);
    p.mu = rng.uniform(-2.0, 2.0);
    p.beta = rng.uniform(0.5, 3.0);
    const double x = rng.uniform(-8.0, 8.0);
    const double lhs = repsku(x, p) + repshu(x, p);
    const double rhs = 2.0 * x * indicator_ge(x, p.lambda);
    r.max_error = std::max(r.max_error, std::abs(lhs - rhs));
  }
  return finish(r);
}

IdentityReport check_swish_embedding(int n_random, std::uint64_t seed) {
  IdentityReport r{"swish-embedding", 0.0, 1e-12, n_random, true};
  Rng rng(seed);
  for (int i = 0; i < n_random; ++i) {
    const double x = rng.uniform(0.0, 10.0);
    const double xi = rng.uniform(0.1, 4.0);
    const double lhs = resku(x, resku_params(0.0, xi, 0.0));
    const double rhs = pswish(x, xi);
    r.max_error = std::max(r.max_error, std::abs(lhs - rhs));
  }
  return finish(r);
}

IdentityReport check_relu_limit(int n_random, std::uint64_t seed) {
  IdentityReport r{"relu-limit", 0.0, 1e-6, n_random, true};
  Rng rng(seed);
  const ActivationParams p = resku_params(0.0, 1e4, 0.0);
  for (int i = 0; i < n_random; ++i) {
    double x = rng.uniform(-8.0, 8.0);
    if (std::abs(x) <= 0.01) x = x < 0.0 ? x - 0.011 : x + 0.011;
    r.max_error = std::max(r.max_error, std::abs(resku(x, p) - relu(x)));
  }
  return finish(r);
}

IdentityReport check_ordering(int n_random, std::uint64_t seed) {
  IdentityReport r{"shrink-stretch-ordering", 0.0, 1e-12, n_random, true};
  Rng rng(seed);
  for (int i = 0; i < n_random; ++i) {
    ActivationParams p;
    p.lambda = rng.uniform(0.0, 2.0);
    p.sigma = rng.uniform(0.3, 3.0);
    p.mu = rng.uniform(-2.0, 2.0);
    p.beta = rng.uniform(0.5, 3.0);
    p.alpha = rng.uniform(0.0, 1.0);
    const double x = p.lambda + rng.uniform(0.0, 8.0);
    const double f = repsku(x, p);
    const double mid = repsu(x, p);
    const double g = repshu(x, p);
    r.max_error = std::max({r.max_error, f - mid, mid - g});
  }
  return finish(r);
}

IdentityReport check_rectification(int n_random, std::uint64_t seed) {
  IdentityReport r{"rectification-below-threshold", 0.0, 0.0, n_random, true};
  Rng rng(seed);
  for (int i = 0; i < n_random; ++i) {
    ActivationParams p;
    p.lambda = rng.uniform(-2.0, 2.0);
    p.sigma = rng.uniform(0.3, 3.0);
    p.mu = rng.uniform(-2.0, 2.0);
    p.beta = rng.uniform(0.5, 3.0);
    p.alpha = rng.uniform(0.0, 1.0);
    p.xi = rng.uniform(0.1, 4.0);
    const double x = p.lambda - rng.uniform(1e-9, 8.0);
    const double worst =
        std::max({std::abs(repsku(x, p)), std::abs(repshu(x, p)), std::abs(repsu(x, p)),
                  std::abs(resku(x, p))});
    r.max_error = std::max(r.max_error, worst);
  }
  return finish(r);
}

IdentityReport check_asymptotic_derivative(int n_random, std::uint64_t seed) {
  IdentityReport r{"asymptotic-derivative", 0.0, 1e-8, n_random, true};
  Rng rng(seed);
  for (int i = 0; i < n_random; ++i) {
    const double lambda = rng.uniform(-2.0, 2.0);
    const double xi = rng.uniform(0.1, 10.0);
    const double mu = rng.uniform(-2.0, 2.0);
    const double x = mu + 100.0 / xi;
    if (x <= lambda) continue;
    r.max_error =
        std::max(r.max_error, std::abs(resku_dx(x, resku_params(lambda, xi, mu)) - 1.0));
  }
  return finish(r);
}

std::vector<IdentityReport> run_identity_suites(int n_random, std::uint64_t seed) {
  return {
      check_translation_identity(n_random, seed),
      check_scaling_identity(n_random, mix_seed(seed, {1})),
      check_complement_identity(n_random, mix_seed(seed, {2})),
      check_swish_embedding(n_random, mix_seed(seed, {3})),
      check_relu_limit(n_random, mix_seed(seed, {4})),
      check_ordering(n_random, mix_seed(seed, {5})),
      check_rectification(n_random, mix_seed(seed, {6})),
      check_asymptotic_derivative(n_random, mix_seed(seed, {7})),
  };
}

}  // namespace rpsu
