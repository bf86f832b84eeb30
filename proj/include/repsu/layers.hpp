#pragma once

#include <vector>

#include "repsu/activations.hpp"
#include "repsu/tensor.hpp"

namespace rpsu {

enum class Mode { kTrain, kInfer };

// 2-D cross-correlation with square kernels.
struct ConvLayer {
  Tensor weights;  // [filters, in_channels, k, k]
  Tensor bias;     // [filters]
  Index stride = 1;
  Index padding = 0;

  Index filters() const noexcept { return weights.dim(0); }
  Index in_channels() const noexcept { return weights.dim(1); }
  Index kernel() const noexcept { return weights.dim(2); }
};

ConvLayer make_conv(Index filters, Index in_channels, Index kernel, Index stride = 1,
                    Index padding = 0);

struct ConvCache {
  Shape input_shape;
  Tensor cols;  // unrolled input patches, kept for the backward pass
};

// x: [B, C, H, W] -> [B, F, H', W'] with H' = (H + 2 pad - k) / stride + 1.
Tensor conv_forward(const ConvLayer& layer, const Tensor& x, ConvCache* cache = nullptr);

struct ConvGrads {
  Tensor d_input, d_weights, d_bias;
};

ConvGrads conv_backward(const ConvLayer& layer, const ConvCache& cache, const Tensor& grad_out);

// Mini-batch normalization over the channel axis (axis 1); batch statistics
// in train mode, running averages in infer mode.
struct BatchNormLayer {
  Tensor gamma, beta_shift;          // [C]
  Tensor running_mean, running_var;  // [C]
  double momentum = 0.9;
  double epsilon = 1e-5;

  Index channels() const noexcept { return gamma.dim(0); }
};

BatchNormLayer make_batchnorm(Index channels, double momentum = 0.9, double epsilon = 1e-5);

struct BatchNormCache {
  Tensor x_hat;
  Tensor inv_std;  // [C]
  Index per_channel_count = 0;
};

Tensor batchnorm_forward(BatchNormLayer& layer, const Tensor& x, Mode mode,
                         BatchNormCache* cache = nullptr);

struct BatchNormGrads {
  Tensor d_input, d_gamma, d_beta_shift;
};

BatchNormGrads batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                                  const Tensor& grad_out);

// One activation function per incoming channel.
struct ActivationLayer {
  std::vector<ActivationSpec> spec_per_channel;

  Index channels() const noexcept { return static_cast<Index>(spec_per_channel.size()); }
};

ActivationLayer make_activation(Family family, Index channels);

// x: [B, C, ...]; channel c transformed elementwise by its own spec.
Tensor activation_forward(const ActivationLayer& layer, const Tensor& x);

struct ActivationLayerGrads {
  Tensor d_input;
  // Per-channel sums of elementwise partials weighted by grad_out; only the
  // family's learnable fields are meaningful.
  std::vector<ScalarGrads> d_params;
};

ActivationLayerGrads activation_backward(const ActivationLayer& layer, const Tensor& x,
                                         const Tensor& grad_out);

struct DenseLayer {
  Tensor weights;  // [out, in]
  Tensor bias;     // [out]

  Index out_features() const noexcept { return weights.dim(0); }
  Index in_features() const noexcept { return weights.dim(1); }
};

DenseLayer make_dense(Index out_features, Index in_features);

// x: [B, in] (higher ranks are flattened past the batch axis) -> [B, out].
Tensor dense_forward(const DenseLayer& layer, const Tensor& x);

struct DenseGrads {
  Tensor d_input, d_weights, d_bias;
};

DenseGrads dense_backward(const DenseLayer& layer, const Tensor& x, const Tensor& grad_out);

// Row-wise softmax with max subtraction; rows sum to 1.
Tensor softmax(const Tensor& logits);

// Mean of -log p[label] over the batch. Labels must lie in [0, L).
double cross_entropy(const Tensor& probs, const std::vector<int>& labels);

// Fused softmax + cross-entropy gradient: (probs - onehot) / B.
Tensor softmax_cross_entropy_backward(const Tensor& probs, const std::vector<int>& labels);

}  // namespace rpsu
