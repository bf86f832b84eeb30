#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "repsu/network.hpp"

namespace rpsu {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 128;
  double lr_weights = 0.01;
  double lr_activation = 0.001;  // activation scalars are few and sensitive
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double sigma_min = 1e-3;
  double xi_min = 1e-3;
  double alpha_lo = 0.0;
  double alpha_hi = 1.0;

  // Throws ConfigError on out-of-range fields.
  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// One momentum-SGD update on a flat block: v <- momentum v - lr g; p <- p + v.
// Throws DivergenceError naming `name` if any gradient is non-finite.
void sgd_update(std::span<double> params, std::span<const double> grads,
                std::span<double> velocity, double lr, double momentum, const std::string& name);

// Constraint projection applied after each update: sigma and xi floored,
// alpha clamped to its bounds. beta is not a learnable parameter and is
// never touched.
void project_param(ParamKind kind, std::span<double> values, const TrainConfig& cfg);

// Momentum SGD over a whole network, with separate learning rates for
// weight tensors and activation-shape scalars.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(TrainConfig cfg) : cfg_(std::move(cfg)) {}

  void step(Network& net, GradientSet& grads);

  const TrainConfig& config() const noexcept { return cfg_; }

 private:
  TrainConfig cfg_;
  std::vector<std::vector<double>> velocity_;  // aligned with bind_parameters order
};

}  // namespace rpsu
