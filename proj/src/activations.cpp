#include "repsu/activations.hpp"

#include <array>

#include <nlohmann/json.hpp>

#include "repsu/errors.hpp"

namespace rpsu {

namespace {

constexpr std::array<Family, kFamilyCount> kAllFamilies = {
    Family::kReLU,  Family::kSigmoid, Family::kReSKU, Family::kRePSKU, Family::kRePSHU,
    Family::kRePSU, Family::kMISH,    Family::kPMISH, Family::kSWISH,  Family::kPSWISH,
};

constexpr std::array<ActParam, 3> kReskuLearnables = {ActParam::kLambda, ActParam::kXi,
                                                      ActParam::kMu};
constexpr std::array<ActParam, 3> kRepskuLearnables = {ActParam::kLambda, ActParam::kSigma,
                                                       ActParam::kMu};
constexpr std::array<ActParam, 4> kRepsuLearnables = {ActParam::kLambda, ActParam::kSigma,
                                                      ActParam::kMu, ActParam::kAlpha};
constexpr std::array<ActParam, 1> kXiOnly = {ActParam::kXi};

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::kReLU: return "relu";
    case Family::kSigmoid: return "sigmoid";
    case Family::kReSKU: return "resku";
    case Family::kRePSKU: return "repsku";
    case Family::kRePSHU: return "repshu";
    case Family::kRePSU: return "repsu";
    case Family::kMISH: return "mish";
    case Family::kPMISH: return "pmish";
    case Family::kSWISH: return "swish";
    case Family::kPSWISH: return "pswish";
  }
  return "unknown";
}

std::optional<Family> family_from_name(const std::string& name) {
  for (Family f : kAllFamilies)
    if (family_name(f) == name) return f;
  return std::nullopt;
}

std::span<const Family> all_families() { return kAllFamilies; }

std::span<const ActParam> learnable_params(Family f) {
  switch (f) {
    case Family::kReSKU: return kReskuLearnables;
    case Family::kRePSKU:
    case Family::kRePSHU: return kRepskuLearnables;
    case Family::kRePSU: return kRepsuLearnables;
    case Family::kPMISH:
    case Family::kPSWISH: return kXiOnly;
    default: return {};
  }
}

std::string act_param_name(ActParam p) {
  switch (p) {
    case ActParam::kLambda: return "lambda";
    case ActParam::kSigma: return "sigma";
    case ActParam::kMu: return "mu";
    case ActParam::kAlpha: return "alpha";
    case ActParam::kXi: return "xi";
  }
  return "unknown";
}

double activation_value(const ActivationSpec& spec, double x) noexcept {
  const ActivationParams& p = spec.params;
  switch (spec.family) {
    case Family::kReLU: return relu(x);
    case Family::kSigmoid: return sigmoid(x);
    case Family::kReSKU: return resku(x, p);
    case Family::kRePSKU: return repsku(x, p);
    case Family::kRePSHU: return repshu(x, p);
    case Family::kRePSU: return repsu(x, p);
    case Family::kMISH: return mish(x);
    case Family::kPMISH: return pmish(x, p.xi);
    case Family::kSWISH: return swish(x);
    case Family::kPSWISH: return pswish(x, p.xi);
  }
  return 0.0;
}

ScalarGrads activation_grads(const ActivationSpec& spec, double x) noexcept {
  const ActivationParams& p = spec.params;
  ScalarGrads g;
  switch (spec.family) {
    case Family::kReLU:
      g.d_input = x > 0.0 ? 1.0 : 0.0;
      return g;
    case Family::kSigmoid: {
      const double s = sigmoid(x);
      g.d_input = s * (1.0 - s);
      return g;
    }
    case Family::kReSKU: return resku_grads(x, p);
    case Family::kRePSKU: return repsku_grads(x, p);
    case Family::kRePSHU: return repshu_grads(x, p);
    case Family::kRePSU: return repsu_grads(x, p);
    case Family::kMISH:
      g.d_input = pmish_dx(x, 1.0);
      return g;
    case Family::kPMISH:
      g.d_input = pmish_dx(x, p.xi);
      g.d_xi = pmish_dxi(x, p.xi);
      return g;
    case Family::kSWISH:
      g.d_input = pswish_dx(x, 1.0);
      return g;
    case Family::kPSWISH:
      g.d_input = pswish_dx(x, p.xi);
      g.d_xi = pswish_dxi(x, p.xi);
      return g;
  }
  return g;
}

double* param_field(ActivationParams& p, ActParam which) noexcept {
  switch (which) {
    case ActParam::kLambda: return &p.lambda;
    case ActParam::kSigma: return &p.sigma;
    case ActParam::kMu: return &p.mu;
    case ActParam::kAlpha: return &p.alpha;
    case ActParam::kXi: return &p.xi;
  }
  return nullptr;
}

double param_field(const ActivationParams& p, ActParam which) noexcept {
  return *param_field(const_cast<ActivationParams&>(p), which);
}

double grad_field(const ScalarGrads& g, ActParam which) noexcept {
  switch (which) {
    case ActParam::kLambda: return g.d_lambda;
    case ActParam::kSigma: return g.d_sigma;
    case ActParam::kMu: return g.d_mu;
    case ActParam::kAlpha: return g.d_alpha;
    case ActParam::kXi: return g.d_xi;
  }
  return 0.0;
}

namespace {

// Families with a sigmoid-factor parameterization serialize (lambda, sigma or
// xi, mu, ...); the fixed baselines serialize only their name.
bool uses_power_params(Family f) {
  return f == Family::kRePSKU || f == Family::kRePSHU || f == Family::kRePSU;
}

}  // namespace

std::string activation_spec_to_json(const ActivationSpec& spec) {
  nlohmann::json j;
  j["family"] = family_name(spec.family);
  const ActivationParams& p = spec.params;
  if (spec.family == Family::kReSKU) {
    j["lambda"] = p.lambda;
    j["xi"] = p.xi;
    j["mu"] = p.mu;
  } else if (uses_power_params(spec.family)) {
    j["lambda"] = p.lambda;
    j["sigma"] = p.sigma;
    j["mu"] = p.mu;
    j["beta"] = p.beta;
    if (spec.family == Family::kRePSU) j["alpha"] = p.alpha;
  } else if (spec.family == Family::kPMISH || spec.family == Family::kPSWISH) {
    j["xi"] = p.xi;
  }
  return j.dump();
}

ActivationSpec activation_spec_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("family")) throw FormatError("activation spec: missing \"family\"");
  const auto fam = family_from_name(j["family"].get<std::string>());
  if (!fam) throw FormatError("activation spec: unknown family " + j["family"].dump());
  ActivationSpec spec;
  spec.family = *fam;
  if (spec.family == Family::kRePSU) spec.params.alpha = 0.5;
  ActivationParams& p = spec.params;
  p.lambda = j.value("lambda", p.lambda);
  p.sigma = j.value("sigma", p.sigma);
  p.mu = j.value("mu", p.mu);
  p.beta = j.value("beta", p.beta);
  p.alpha = j.value("alpha", p.alpha);
  p.xi = j.value("xi", p.xi);
  return spec;
}

ActivationGrads activation_grads_field(const ActivationSpec& spec, const Tensor& x) {
  ActivationGrads out;
  out.d_input = Tensor(x.shape());
  auto field_for = [&](ActParam which) -> Tensor* {
    switch (which) {
      case ActParam::kLambda: out.d_lambda.emplace(x.shape()); return &*out.d_lambda;
      case ActParam::kSigma: out.d_sigma.emplace(x.shape()); return &*out.d_sigma;
      case ActParam::kMu: out.d_mu.emplace(x.shape()); return &*out.d_mu;
      case ActParam::kAlpha: out.d_alpha.emplace(x.shape()); return &*out.d_alpha;
      case ActParam::kXi: out.d_xi.emplace(x.shape()); return &*out.d_xi;
    }
    return nullptr;
  };
  const auto learnables = learnable_params(spec.family);
  std::array<Tensor*, 5> slots{};
  std::array<ActParam, 5> kinds{};
  std::size_t n_learn = 0;
  for (ActParam which : learnables) {
    kinds[n_learn] = which;
    slots[n_learn++] = field_for(which);
  }
  for (Index i = 0; i < x.size(); ++i) {
    const ScalarGrads g = activation_grads(spec, x[i]);
    out.d_input[i] = g.d_input;
    for (std::size_t k = 0; k < n_learn; ++k) (*slots[k])[i] = grad_field(g, kinds[k]);
  }
  return out;
}

}  // namespace rpsu
