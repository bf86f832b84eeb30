#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "repsu/tensor.hpp"

namespace rpsu {

// Rectified power sigmoid units and the baselines they are compared against.
// RePSKU attenuates small positives below the identity diagonal, RePSHU
// amplifies them above it, and RePSU mixes the two with weight alpha.
enum class Family {
  kReLU,
  kSigmoid,
  kReSKU,
  kRePSKU,
  kRePSHU,
  kRePSU,
  kMISH,
  kPMISH,
  kSWISH,
  kPSWISH,
};

constexpr int kFamilyCount = 10;

std::string family_name(Family f);
std::optional<Family> family_from_name(const std::string& name);
std::span<const Family> all_families();

struct ActivationParams {
  double lambda = 0.0;  // threshold: inputs below it are forced to zero
  double sigma = 1.0;   // scale of the sigmoid factor, > 0
  double mu = 0.0;      // shift of the sigmoid factor
  double beta = 1.0;    // shape exponent, > 0; held constant during training
  double alpha = 0.0;   // stretch/shrink mixing weight in [0, 1]
  double xi = 1.0;      // inverse scale used by ReSKU / PMISH / PSWISH, > 0
};

// Arguments to exp are clamped here; past the clamp the sigmoid factor is
// saturated flat at 0 or 1.
constexpr double kExpClamp = 700.0;

inline double stable_logistic(double z) noexcept {
  if (z >= kExpClamp) return 1.0;
  if (z <= -kExpClamp) return 0.0;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

inline double sigmoid(double x) noexcept { return stable_logistic(x); }

inline double indicator_ge(double x, double lambda) noexcept { return x >= lambda ? 1.0 : 0.0; }

inline double sgn(double v) noexcept {
  return static_cast<double>(v > 0.0) - static_cast<double>(v < 0.0);
}

// Signed power exponent sgn(x-mu) * (|x-mu|/sigma)^beta.
inline double power_exponent(double x, const ActivationParams& p) noexcept {
  const double r = x - p.mu;
  if (r == 0.0) return 0.0;
  return sgn(r) * std::pow(std::abs(r) / p.sigma, p.beta);
}

// d/dx of the signed power exponent. At x == mu the value is 1/sigma for
// beta == 1 (the exponent is exactly linear there) and 0 otherwise; the
// beta != 1 case is a cusp excluded from the differentiability guarantee.
inline double power_exponent_dx(double x, const ActivationParams& p) noexcept {
  const double r = x - p.mu;
  if (r == 0.0) return p.beta == 1.0 ? 1.0 / p.sigma : 0.0;
  return p.beta * std::pow(std::abs(r) / p.sigma, p.beta - 1.0) / p.sigma;
}

// Shrinkage unit: (x - lambda) * 1l_lambda(x) / (1 + exp(-sgn(x-mu) (|x-mu|/sigma)^beta)).
inline double repsku(double x, const ActivationParams& p) noexcept {
  if (x < p.lambda) return 0.0;
  return (x - p.lambda) * stable_logistic(power_exponent(x, p));
}

// Stretchage unit: 2x * 1l_lambda(x) - repsku(x).
inline double repshu(double x, const ActivationParams& p) noexcept {
  if (x < p.lambda) return 0.0;
  return 2.0 * x - repsku(x, p);
}

// alpha-mix of stretchage and shrinkage.
inline double repsu(double x, const ActivationParams& p) noexcept {
  return p.alpha * repshu(x, p) + (1.0 - p.alpha) * repsku(x, p);
}

// Fixed-shape subclass with beta = 1 and xi = 1/sigma:
// (x - lambda) / (1 + exp(-xi (x - mu))) for x >= lambda, else 0.
inline double resku(double x, const ActivationParams& p) noexcept {
  if (x < p.lambda) return 0.0;
  return (x - p.lambda) * stable_logistic(p.xi * (x - p.mu));
}

// Closed-form ReSKU input derivative, lower branch (value 0) at x == lambda
// so that dead inputs stay dead, mirroring the ReLU subgradient convention.
// Past the exponential clamp the sigmoid factor is saturated flat, so the
// derivative is exactly 0 (dead side) or 1 (asymptote).
inline double resku_dx(double x, const ActivationParams& p) noexcept {
  if (x <= p.lambda) return 0.0;
  const double t = p.xi * (x - p.mu);
  if (t <= -kExpClamp) return 0.0;
  if (t >= kExpClamp) return 1.0;
  const double e = std::exp(-t);
  const double u = (x - p.lambda) / (1.0 + e);
  return (1.0 + p.xi * u * e) / (1.0 + e);
}

// Partials of one scalar activation evaluation. d_input always applies;
// the parameter slots are meaningful only for that family's learnables.
struct ScalarGrads {
  double d_input = 0.0;
  double d_lambda = 0.0;
  double d_sigma = 0.0;
  double d_mu = 0.0;
  double d_alpha = 0.0;
  double d_xi = 0.0;
};

// Partials of repsku w.r.t. (x, lambda, sigma, mu). All zero at and below the
// threshold (dead-input convention; the threshold itself is a kink).
inline ScalarGrads repsku_grads(double x, const ActivationParams& p) noexcept {
  ScalarGrads g;
  if (x <= p.lambda) return g;
  const double rect = x - p.lambda;
  const double z = power_exponent(x, p);
  const double s = stable_logistic(z);
  const double sp = s * (1.0 - s);
  const double dzdx = power_exponent_dx(x, p);
  g.d_input = s + rect * sp * dzdx;
  g.d_lambda = -s;
  g.d_sigma = rect * sp * (-p.beta * z / p.sigma);
  g.d_mu = -rect * sp * dzdx;
  return g;
}

inline ScalarGrads repshu_grads(double x, const ActivationParams& p) noexcept {
  ScalarGrads g;
  if (x <= p.lambda) return g;
  const ScalarGrads f = repsku_grads(x, p);
  g.d_input = 2.0 - f.d_input;
  g.d_lambda = -f.d_lambda;
  g.d_sigma = -f.d_sigma;
  g.d_mu = -f.d_mu;
  return g;
}

// Partials of the alpha-mix w.r.t. (x, lambda, sigma, mu, alpha); beta is a
// constant and is never differentiated. d_alpha is exactly repshu - repsku.
inline ScalarGrads repsu_grads(double x, const ActivationParams& p) noexcept {
  ScalarGrads g;
  g.d_alpha = repshu(x, p) - repsku(x, p);
  if (x <= p.lambda) return g;
  const ScalarGrads f = repsku_grads(x, p);
  const double mix = 1.0 - 2.0 * p.alpha;
  g.d_input = p.alpha * (2.0 - f.d_input) + (1.0 - p.alpha) * f.d_input;
  g.d_lambda = mix * f.d_lambda;
  g.d_sigma = mix * f.d_sigma;
  g.d_mu = mix * f.d_mu;
  return g;
}

inline double repsu_dx(double x, const ActivationParams& p) noexcept {
  return repsu_grads(x, p).d_input;
}

// Partials of ReSKU w.r.t. (x, lambda, xi, mu).
inline ScalarGrads resku_grads(double x, const ActivationParams& p) noexcept {
  ScalarGrads g;
  if (x <= p.lambda) return g;
  const double s = stable_logistic(p.xi * (x - p.mu));
  const double sp = s * (1.0 - s);
  const double rect = x - p.lambda;
  g.d_input = s + rect * sp * p.xi;
  g.d_lambda = -s;
  g.d_xi = rect * sp * (x - p.mu);
  g.d_mu = -rect * sp * p.xi;
  return g;
}

// log(1 + e^t) without overflow.
inline double softplus(double t) noexcept {
  if (t > 0.0) return t + std::log1p(std::exp(-std::min(t, kExpClamp)));
  return std::log1p(std::exp(std::max(t, -kExpClamp)));
}

// x tanh(softplus(xi x) / xi)
inline double pmish(double x, double xi) noexcept {
  return x * std::tanh(softplus(xi * x) / xi);
}

inline double mish(double x) noexcept { return pmish(x, 1.0); }

// x / (1 + e^{-xi x})
inline double pswish(double x, double xi) noexcept { return x * stable_logistic(xi * x); }

inline double swish(double x) noexcept { return pswish(x, 1.0); }

inline double pmish_dx(double x, double xi) noexcept {
  const double sp = softplus(xi * x) / xi;
  const double t = std::tanh(sp);
  return t + x * (1.0 - t * t) * stable_logistic(xi * x);
}

inline double pmish_dxi(double x, double xi) noexcept {
  const double sp = softplus(xi * x) / xi;
  const double t = std::tanh(sp);
  const double dsp_dxi = (x * stable_logistic(xi * x) - sp) / xi;
  return x * (1.0 - t * t) * dsp_dxi;
}

inline double pswish_dx(double x, double xi) noexcept {
  const double s = stable_logistic(xi * x);
  return s * (1.0 + xi * x * (1.0 - s));
}

inline double pswish_dxi(double x, double xi) noexcept {
  const double s = stable_logistic(xi * x);
  return x * x * s * (1.0 - s);
}

// An activation family plus its (possibly learnable) parameters.
struct ActivationSpec {
  Family family = Family::kReLU;
  ActivationParams params;
};

// Which parameter fields a family trains.
enum class ActParam { kLambda, kSigma, kMu, kAlpha, kXi };

std::span<const ActParam> learnable_params(Family f);
std::string act_param_name(ActParam p);

double activation_value(const ActivationSpec& spec, double x) noexcept;
ScalarGrads activation_grads(const ActivationSpec& spec, double x) noexcept;

double* param_field(ActivationParams& p, ActParam which) noexcept;
double param_field(const ActivationParams& p, ActParam which) noexcept;
double grad_field(const ScalarGrads& g, ActParam which) noexcept;

// JSON object {"family": ..., "lambda": ..., ...}; only fields the family
// uses are emitted, absent fields take the family defaults on parse.
std::string activation_spec_to_json(const ActivationSpec& spec);
ActivationSpec activation_spec_from_json(const std::string& text);

// Elementwise partials over a whole tensor; parameter fields are present
// only for the family's learnables and share the input shape.
struct ActivationGrads {
  Tensor d_input;
  std::optional<Tensor> d_lambda, d_sigma, d_mu, d_alpha, d_xi;
};

ActivationGrads activation_grads_field(const ActivationSpec& spec, const Tensor& x);

}  // namespace rpsu
