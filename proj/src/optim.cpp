#include "repsu/optim.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "repsu/errors.hpp"

namespace rpsu {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 2)
    throw ConfigError("batch_size must be >= 2, got " + std::to_string(batch_size));
  if (!(lr_weights > 0.0) || !std::isfinite(lr_weights))
    throw ConfigError("lr_weights must be positive and finite");
  if (!(lr_activation > 0.0) || !std::isfinite(lr_activation))
    throw ConfigError("lr_activation must be positive and finite");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0,1)");
  if (!(sigma_min > 0.0)) throw ConfigError("sigma_min must be positive");
  if (!(xi_min > 0.0)) throw ConfigError("xi_min must be positive");
  if (alpha_lo > alpha_hi) throw ConfigError("alpha bounds inverted");
}

std::string train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr_weights"] = cfg.lr_weights;
  j["lr_activation"] = cfg.lr_activation;
  j["momentum"] = cfg.momentum;
  j["seed"] = cfg.seed;
  j["sigma_min"] = cfg.sigma_min;
  j["xi_min"] = cfg.xi_min;
  j["alpha_bounds"] = {cfg.alpha_lo, cfg.alpha_hi};
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.lr_weights = j.value("lr_weights", cfg.lr_weights);
  cfg.lr_activation = j.value("lr_activation", cfg.lr_activation);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.sigma_min = j.value("sigma_min", cfg.sigma_min);
  cfg.xi_min = j.value("xi_min", cfg.xi_min);
  if (j.contains("alpha_bounds")) {
    cfg.alpha_lo = j["alpha_bounds"].at(0).get<double>();
    cfg.alpha_hi = j["alpha_bounds"].at(1).get<double>();
  }
  return cfg;
}

void sgd_update(std::span<double> params, std::span<const double> grads,
                std::span<double> velocity, double lr, double momentum, const std::string& name) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(grads[i]))
      throw DivergenceError(name, "non-finite gradient in " + name);
    velocity[i] = momentum * velocity[i] - lr * grads[i];
    params[i] += velocity[i];
  }
}

void project_param(ParamKind kind, std::span<double> values, const TrainConfig& cfg) {
  switch (kind) {
    case ParamKind::kActSigma:
      for (double& v : values) v = std::max(v, cfg.sigma_min);
      break;
    case ParamKind::kActXi:
      for (double& v : values) v = std::max(v, cfg.xi_min);
      break;
    case ParamKind::kActAlpha:
      for (double& v : values) v = std::clamp(v, cfg.alpha_lo, cfg.alpha_hi);
      break;
    default:
      break;
  }
}

void SgdOptimizer::step(Network& net, GradientSet& grads) {
  auto bindings = bind_parameters(net, &grads);
  if (velocity_.empty()) {
    velocity_.reserve(bindings.size());
    for (const ParamBinding& b : bindings)
      velocity_.emplace_back(static_cast<std::size_t>(b.count), 0.0);
  }
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    ParamBinding& b = bindings[i];
    const double lr = is_activation_param(b.kind) ? cfg_.lr_activation : cfg_.lr_weights;
    sgd_update({b.values, static_cast<std::size_t>(b.count)},
               {b.grads, static_cast<std::size_t>(b.count)}, velocity_[i], lr, cfg_.momentum,
               b.name);
    project_param(b.kind, {b.values, static_cast<std::size_t>(b.count)}, cfg_);
  }
}

}  // namespace rpsu
