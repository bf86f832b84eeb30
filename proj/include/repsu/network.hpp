#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "repsu/layers.hpp"
#include "repsu/rng.hpp"

namespace rpsu {

// Documented hyperparameter ranges for the sweep axes.
constexpr Index kMinFilters = 1, kMaxFilters = 512;
constexpr Index kMinKernel = 1, kMaxKernel = 11;

struct ConvSpec {
  Index filters = 1;
  Index kernel = 1;
  Index stride = 1;
  Index padding = 0;
};

struct BatchNormSpec {
  double momentum = 0.9;
  double epsilon = 1e-5;
};

struct ActivationLayerSpec {
  Family family = Family::kReLU;
};

struct DenseSpec {
  Index units = 1;
};

struct SoftmaxSpec {};

using LayerSpec = std::variant<ConvSpec, BatchNormSpec, ActivationLayerSpec, DenseSpec, SoftmaxSpec>;

// Declarative architecture description; input_shape is [H, W, C], batches
// are carried as [B, C, H, W].
struct NetworkSpec {
  std::array<Index, 3> input_shape{};
  Index num_classes = 0;
  std::vector<LayerSpec> layers;
};

// Shallow network: conv(ncf, cfs) -> batchnorm -> activation -> dense(L) -> softmax.
NetworkSpec cnn1_spec(Index ncf, Index cfs, Family activation, Index num_classes,
                      std::array<Index, 3> input_shape);

// Deep network: five conv/batchnorm/activation stages (96-3x3 with the chosen
// family, then 128-5x5, 384-7x7, 192-5x5, 128-3x3 with fixed ReLU), a 4096-wide
// hidden dense layer, and the classification head. Convolutions use stride 1
// with same padding. Only the first stage carries the learnable activation.
NetworkSpec cnn2_spec(Family activation, Index num_classes, std::array<Index, 3> input_shape);

struct SoftmaxLayer {};

using Layer = std::variant<ConvLayer, BatchNormLayer, ActivationLayer, DenseLayer, SoftmaxLayer>;

struct Network {
  NetworkSpec spec;
  std::vector<Layer> layers;
};

// Materializes weights: conv/dense uniform in +-sqrt(6/fan_in), biases zero,
// batchnorm at identity. Activation parameters keep family defaults; the
// experiment harness owns their random initialization.
Network build_network(const NetworkSpec& spec, Rng& rng);

struct ActCache {
  Tensor input;
};
struct DenseCache {
  Tensor input;
};

using LayerCache =
    std::variant<std::monostate, ConvCache, BatchNormCache, ActCache, DenseCache>;

struct ForwardResult {
  Tensor logits;
  std::vector<LayerCache> caches;
};

// Runs every layer up to the softmax head. Train mode uses batch statistics
// and updates batchnorm running averages.
ForwardResult forward(Network& net, const Tensor& batch, Mode mode);

using LayerGrads =
    std::variant<std::monostate, ConvGrads, BatchNormGrads, ActivationLayerGrads, DenseGrads>;

struct GradientSet {
  std::vector<LayerGrads> per_layer;
};

// Gradient of the batch cross-entropy w.r.t. every learnable tensor and
// activation scalar; the softmax + cross-entropy head is differentiated fused.
GradientSet backward(const Network& net, const ForwardResult& fr, const std::vector<int>& labels);

double loss_from_logits(const Tensor& logits, const std::vector<int>& labels);

// Convenience: forward + cross-entropy.
double batch_loss(Network& net, const Tensor& batch, const std::vector<int>& labels, Mode mode);

// Argmax of the softmax rows, infer mode.
std::vector<int> predict(Network& net, const Tensor& batch);

enum class ParamKind {
  kWeights,
  kBias,
  kBnGamma,
  kBnBeta,
  kActLambda,
  kActSigma,
  kActMu,
  kActAlpha,
  kActXi,
};

bool is_activation_param(ParamKind kind) noexcept;

struct ParamBinding {
  std::string name;
  ParamKind kind;
  double* values = nullptr;       // borrowed from the network
  const double* grads = nullptr;  // borrowed from a GradientSet, may be null
  Index count = 0;
};

// Canonical flat view of all learnable parameters, in layer order. When a
// GradientSet produced by backward() is supplied, each binding also carries
// its gradient block in the same order.
std::vector<ParamBinding> bind_parameters(Network& net, GradientSet* grads = nullptr);

Index parameter_count(const Network& net);

// spec.json + raw little-endian float64 blob with a manifest of tensor
// names, shapes and byte offsets. State includes batchnorm running averages
// and per-channel activation parameters.
void save_network(const Network& net, const std::string& spec_path,
                  const std::string& weights_path);
Network load_network(const std::string& spec_path, const std::string& weights_path);

std::string network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const std::string& text);

}  // namespace rpsu
