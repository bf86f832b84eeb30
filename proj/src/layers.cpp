#include "repsu/layers.hpp"

#include <cmath>

#include "repsu/errors.hpp"

namespace rpsu {

namespace {

void require_rank4(const Tensor& x, const char* who) {
  if (x.rank() != 4)
    throw ShapeError(std::string(who) + " expects [B,C,H,W], got " + shape_to_string(x.shape()));
}

void require_channel_axis(const Tensor& x, Index channels, const char* who) {
  if (x.rank() < 2)
    throw ShapeError(std::string(who) + " expects a batch and a channel axis, got " +
                     shape_to_string(x.shape()));
  if (x.dim(1) != channels)
    throw ShapeError(std::string(who) + ": channel count " + std::to_string(x.dim(1)) +
                     " does not match layer channels " + std::to_string(channels));
}

Index inner_extent(const Tensor& x) { return x.size() / (x.dim(0) * x.dim(1)); }

}  // namespace

ConvLayer make_conv(Index filters, Index in_channels, Index kernel, Index stride, Index padding) {
  if (filters < 1 || in_channels < 1 || kernel < 1 || stride < 1 || padding < 0)
    throw ConfigError("conv layer: non-positive filter/channel/kernel/stride");
  ConvLayer layer;
  layer.weights = zeros({filters, in_channels, kernel, kernel});
  layer.bias = zeros({filters});
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

Tensor conv_forward(const ConvLayer& layer, const Tensor& x, ConvCache* cache) {
  require_rank4(x, "conv_forward");
  const Index batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const Index k = layer.kernel(), stride = layer.stride, pad = layer.padding;
  if (channels != layer.in_channels())
    throw ShapeError("conv_forward: input channels " + std::to_string(channels) +
                     " != layer channels " + std::to_string(layer.in_channels()));
  if (height + 2 * pad < k || width + 2 * pad < k)
    throw ShapeError("conv_forward: input " + shape_to_string(x.shape()) +
                     " too small for kernel " + std::to_string(k));
  const Index out_h = (height + 2 * pad - k) / stride + 1;
  const Index out_w = (width + 2 * pad - k) / stride + 1;
  const Index patch = channels * k * k;
  const Index positions = out_h * out_w;

  Eigen::MatrixXd cols(patch, batch * positions);
  for (Index b = 0; b < batch; ++b) {
    const double* xb = x.data() + b * channels * height * width;
    for (Index oy = 0; oy < out_h; ++oy)
      for (Index ox = 0; ox < out_w; ++ox) {
        double* col = cols.data() + (b * positions + oy * out_w + ox) * patch;
        for (Index c = 0; c < channels; ++c) {
          const double* xc = xb + c * height * width;
          for (Index ky = 0; ky < k; ++ky) {
            const Index iy = oy * stride + ky - pad;
            for (Index kx = 0; kx < k; ++kx) {
              const Index ix = ox * stride + kx - pad;
              *col++ = (iy >= 0 && iy < height && ix >= 0 && ix < width) ? xc[iy * width + ix]
                                                                         : 0.0;
            }
          }
        }
      }
  }

  ConstMatrixMap weight_mat(layer.weights.data(), layer.filters(), patch);
  Eigen::MatrixXd out_mat = weight_mat * cols;  // [F, B * positions]

  Tensor out({batch, layer.filters(), out_h, out_w});
  for (Index b = 0; b < batch; ++b)
    for (Index f = 0; f < layer.filters(); ++f) {
      double* dst = out.data() + (b * layer.filters() + f) * positions;
      const double bias = layer.bias[f];
      for (Index pos = 0; pos < positions; ++pos) dst[pos] = out_mat(f, b * positions + pos) + bias;
    }

  if (cache) {
    cache->input_shape = x.shape();
    cache->cols = Tensor({patch, batch * positions});
    Eigen::Map<Eigen::MatrixXd>(cache->cols.data(), patch, batch * positions) = cols;
  }
  return out;
}

ConvGrads conv_backward(const ConvLayer& layer, const ConvCache& cache, const Tensor& grad_out) {
  require_rank4(grad_out, "conv_backward");
  const Index batch = cache.input_shape[0], channels = cache.input_shape[1];
  const Index height = cache.input_shape[2], width = cache.input_shape[3];
  const Index k = layer.kernel(), stride = layer.stride, pad = layer.padding;
  const Index out_h = grad_out.dim(2), out_w = grad_out.dim(3);
  const Index positions = out_h * out_w;
  const Index patch = channels * k * k;
  if (grad_out.dim(0) != batch || grad_out.dim(1) != layer.filters())
    throw ShapeError("conv_backward: grad shape " + shape_to_string(grad_out.shape()) +
                     " inconsistent with forward");

  Eigen::MatrixXd delta(layer.filters(), batch * positions);
  for (Index b = 0; b < batch; ++b)
    for (Index f = 0; f < layer.filters(); ++f) {
      const double* src = grad_out.data() + (b * layer.filters() + f) * positions;
      for (Index pos = 0; pos < positions; ++pos) delta(f, b * positions + pos) = src[pos];
    }

  ConvGrads grads;
  grads.d_bias = Tensor({layer.filters()});
  for (Index f = 0; f < layer.filters(); ++f) grads.d_bias[f] = delta.row(f).sum();

  Eigen::Map<const Eigen::MatrixXd> cols(cache.cols.data(), patch, batch * positions);
  grads.d_weights = Tensor(layer.weights.shape());
  MatrixMap dw_mat(grads.d_weights.data(), layer.filters(), patch);
  dw_mat.noalias() = delta * cols.transpose();

  ConstMatrixMap weight_mat(layer.weights.data(), layer.filters(), patch);
  Eigen::MatrixXd d_cols = weight_mat.transpose() * delta;  // [patch, B * positions]

  grads.d_input = Tensor(cache.input_shape);
  for (Index b = 0; b < batch; ++b) {
    double* gb = grads.d_input.data() + b * channels * height * width;
    for (Index oy = 0; oy < out_h; ++oy)
      for (Index ox = 0; ox < out_w; ++ox) {
        const double* col = d_cols.data() + (b * positions + oy * out_w + ox) * patch;
        for (Index c = 0; c < channels; ++c) {
          double* gc = gb + c * height * width;
          for (Index ky = 0; ky < k; ++ky) {
            const Index iy = oy * stride + ky - pad;
            for (Index kx = 0; kx < k; ++kx) {
              const Index ix = ox * stride + kx - pad;
              if (iy >= 0 && iy < height && ix >= 0 && ix < width) gc[iy * width + ix] += *col;
              ++col;
            }
          }
        }
      }
  }
  return grads;
}

BatchNormLayer make_batchnorm(Index channels, double momentum, double epsilon) {
  if (channels < 1) throw ConfigError("batchnorm: channels must be positive");
  BatchNormLayer layer;
  layer.gamma = full({channels}, 1.0);
  layer.beta_shift = zeros({channels});
  layer.running_mean = zeros({channels});
  layer.running_var = full({channels}, 1.0);
  layer.momentum = momentum;
  layer.epsilon = epsilon;
  return layer;
}

Tensor batchnorm_forward(BatchNormLayer& layer, const Tensor& x, Mode mode,
                         BatchNormCache* cache) {
  require_channel_axis(x, layer.channels(), "batchnorm_forward");
  const Index batch = x.dim(0), channels = x.dim(1), inner = inner_extent(x);

  Tensor out(x.shape());
  if (mode == Mode::kInfer) {
    for (Index c = 0; c < channels; ++c) {
      const double scale = layer.gamma[c] / std::sqrt(layer.running_var[c] + layer.epsilon);
      const double shift = layer.beta_shift[c] - scale * layer.running_mean[c];
      for (Index b = 0; b < batch; ++b) {
        const double* src = x.data() + (b * channels + c) * inner;
        double* dst = out.data() + (b * channels + c) * inner;
        for (Index i = 0; i < inner; ++i) dst[i] = scale * src[i] + shift;
      }
    }
    return out;
  }

  if (batch < 2)
    throw DegenerateBatchError("batchnorm_forward: train mode needs batch size >= 2, got " +
                               std::to_string(batch));

  const Index count = batch * inner;
  if (cache) {
    cache->x_hat = Tensor(x.shape());
    cache->inv_std = Tensor({channels});
    cache->per_channel_count = count;
  }
  for (Index c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (Index b = 0; b < batch; ++b) {
      const double* src = x.data() + (b * channels + c) * inner;
      for (Index i = 0; i < inner; ++i) sum += src[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (Index b = 0; b < batch; ++b) {
      const double* src = x.data() + (b * channels + c) * inner;
      for (Index i = 0; i < inner; ++i) {
        const double d = src[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    const double inv_std = 1.0 / std::sqrt(var + layer.epsilon);

    for (Index b = 0; b < batch; ++b) {
      const double* src = x.data() + (b * channels + c) * inner;
      double* dst = out.data() + (b * channels + c) * inner;
      double* hat = cache ? cache->x_hat.data() + (b * channels + c) * inner : nullptr;
      for (Index i = 0; i < inner; ++i) {
        const double xh = (src[i] - mean) * inv_std;
        if (hat) hat[i] = xh;
        dst[i] = layer.gamma[c] * xh + layer.beta_shift[c];
      }
    }
    if (cache) cache->inv_std[c] = inv_std;

    layer.running_mean[c] = layer.momentum * layer.running_mean[c] + (1.0 - layer.momentum) * mean;
    layer.running_var[c] = layer.momentum * layer.running_var[c] + (1.0 - layer.momentum) * var;
  }
  return out;
}

BatchNormGrads batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                                  const Tensor& grad_out) {
  const Tensor& x_hat = cache.x_hat;
  if (!same_shape(x_hat, grad_out))
    throw ShapeError("batchnorm_backward: grad shape " + shape_to_string(grad_out.shape()) +
                     " does not match cached " + shape_to_string(x_hat.shape()));
  const Index batch = grad_out.dim(0), channels = grad_out.dim(1), inner = inner_extent(grad_out);
  const double count = static_cast<double>(cache.per_channel_count);

  BatchNormGrads grads;
  grads.d_input = Tensor(grad_out.shape());
  grads.d_gamma = Tensor({channels});
  grads.d_beta_shift = Tensor({channels});

  for (Index c = 0; c < channels; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (Index b = 0; b < batch; ++b) {
      const double* g = grad_out.data() + (b * channels + c) * inner;
      const double* h = x_hat.data() + (b * channels + c) * inner;
      for (Index i = 0; i < inner; ++i) {
        sum_g += g[i];
        sum_gx += g[i] * h[i];
      }
    }
    grads.d_gamma[c] = sum_gx;
    grads.d_beta_shift[c] = sum_g;

    const double scale = layer.gamma[c] * cache.inv_std[c];
    const double mean_g = sum_g / count;
    const double mean_gx = sum_gx / count;
    for (Index b = 0; b < batch; ++b) {
      const double* g = grad_out.data() + (b * channels + c) * inner;
      const double* h = x_hat.data() + (b * channels + c) * inner;
      double* d = grads.d_input.data() + (b * channels + c) * inner;
      for (Index i = 0; i < inner; ++i) d[i] = scale * (g[i] - mean_g - h[i] * mean_gx);
    }
  }
  return grads;
}

ActivationLayer make_activation(Family family, Index channels) {
  if (channels < 1) throw ConfigError("activation layer: channels must be positive");
  ActivationLayer layer;
  ActivationSpec spec;
  spec.family = family;
  if (family == Family::kRePSU) spec.params.alpha = 0.5;
  layer.spec_per_channel.assign(static_cast<std::size_t>(channels), spec);
  return layer;
}

Tensor activation_forward(const ActivationLayer& layer, const Tensor& x) {
  require_channel_axis(x, layer.channels(), "activation_forward");
  const Index batch = x.dim(0), channels = x.dim(1), inner = inner_extent(x);
  Tensor out(x.shape());
  for (Index c = 0; c < channels; ++c) {
    const ActivationSpec& spec = layer.spec_per_channel[static_cast<std::size_t>(c)];
    for (Index b = 0; b < batch; ++b) {
      const double* src = x.data() + (b * channels + c) * inner;
      double* dst = out.data() + (b * channels + c) * inner;
      for (Index i = 0; i < inner; ++i) dst[i] = activation_value(spec, src[i]);
    }
  }
  return out;
}

ActivationLayerGrads activation_backward(const ActivationLayer& layer, const Tensor& x,
                                         const Tensor& grad_out) {
  require_channel_axis(x, layer.channels(), "activation_backward");
  if (!same_shape(x, grad_out))
    throw ShapeError("activation_backward: grad shape " + shape_to_string(grad_out.shape()) +
                     " does not match input " + shape_to_string(x.shape()));
  const Index batch = x.dim(0), channels = x.dim(1), inner = inner_extent(x);

  ActivationLayerGrads grads;
  grads.d_input = Tensor(x.shape());
  grads.d_params.assign(static_cast<std::size_t>(channels), ScalarGrads{});

  for (Index c = 0; c < channels; ++c) {
    const ActivationSpec& spec = layer.spec_per_channel[static_cast<std::size_t>(c)];
    ScalarGrads& acc = grads.d_params[static_cast<std::size_t>(c)];
    for (Index b = 0; b < batch; ++b) {
      const double* src = x.data() + (b * channels + c) * inner;
      const double* g = grad_out.data() + (b * channels + c) * inner;
      double* d = grads.d_input.data() + (b * channels + c) * inner;
      for (Index i = 0; i < inner; ++i) {
        const ScalarGrads sg = activation_grads(spec, src[i]);
        d[i] = sg.d_input * g[i];
        acc.d_lambda += sg.d_lambda * g[i];
        acc.d_sigma += sg.d_sigma * g[i];
        acc.d_mu += sg.d_mu * g[i];
        acc.d_alpha += sg.d_alpha * g[i];
        acc.d_xi += sg.d_xi * g[i];
      }
    }
  }
  return grads;
}

DenseLayer make_dense(Index out_features, Index in_features) {
  if (out_features < 1 || in_features < 1) throw ConfigError("dense layer: non-positive size");
  DenseLayer layer;
  layer.weights = zeros({out_features, in_features});
  layer.bias = zeros({out_features});
  return layer;
}

namespace {

ConstMatrixMap flatten_batch(const Tensor& x, Index expected_in, const char* who) {
  if (x.rank() < 2)
    throw ShapeError(std::string(who) + " expects at least rank 2, got " +
                     shape_to_string(x.shape()));
  const Index batch = x.dim(0);
  const Index features = x.size() / batch;
  if (features != expected_in)
    throw ShapeError(std::string(who) + ": " + std::to_string(features) +
                     " features do not match layer input size " + std::to_string(expected_in));
  return ConstMatrixMap(x.data(), batch, features);
}

}  // namespace

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  ConstMatrixMap x_mat = flatten_batch(x, layer.in_features(), "dense_forward");
  ConstMatrixMap w_mat(layer.weights.data(), layer.out_features(), layer.in_features());
  Tensor out({x.dim(0), layer.out_features()});
  MatrixMap out_mat = out.matrix();
  out_mat.noalias() = x_mat * w_mat.transpose();
  ConstArrayMap bias = layer.bias.array();
  for (Index b = 0; b < out.dim(0); ++b)
    out_mat.row(b) += bias.matrix().transpose();
  return out;
}

DenseGrads dense_backward(const DenseLayer& layer, const Tensor& x, const Tensor& grad_out) {
  ConstMatrixMap x_mat = flatten_batch(x, layer.in_features(), "dense_backward");
  if (grad_out.rank() != 2 || grad_out.dim(0) != x.dim(0) ||
      grad_out.dim(1) != layer.out_features())
    throw ShapeError("dense_backward: grad shape " + shape_to_string(grad_out.shape()) +
                     " inconsistent with layer");
  ConstMatrixMap go = grad_out.matrix();
  ConstMatrixMap w_mat(layer.weights.data(), layer.out_features(), layer.in_features());

  DenseGrads grads;
  grads.d_weights = Tensor(layer.weights.shape());
  MatrixMap dw(grads.d_weights.data(), layer.out_features(), layer.in_features());
  dw.noalias() = go.transpose() * x_mat;

  grads.d_bias = Tensor({layer.out_features()});
  for (Index j = 0; j < layer.out_features(); ++j) grads.d_bias[j] = go.col(j).sum();

  grads.d_input = Tensor(x.shape());
  MatrixMap dx(grads.d_input.data(), x.dim(0), layer.in_features());
  dx.noalias() = go * w_mat;
  return grads;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2)
    throw ShapeError("softmax expects [B,L] logits, got " + shape_to_string(logits.shape()));
  const Index batch = logits.dim(0), classes = logits.dim(1);
  Tensor probs(logits.shape());
  for (Index b = 0; b < batch; ++b) {
    const double* row = logits.data() + b * classes;
    double* out = probs.data() + b * classes;
    double mx = row[0];
    for (Index j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (Index j = 0; j < classes; ++j) {
      out[j] = std::exp(row[j] - mx);
      sum += out[j];
    }
    for (Index j = 0; j < classes; ++j) out[j] /= sum;
  }
  return probs;
}

double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.rank() != 2)
    throw ShapeError("cross_entropy expects [B,L] probabilities");
  const Index batch = probs.dim(0), classes = probs.dim(1);
  if (static_cast<Index>(labels.size()) != batch)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(batch));
  double total = 0.0;
  for (Index b = 0; b < batch; ++b) {
    const int label = labels[static_cast<std::size_t>(b)];
    if (label < 0 || label >= classes)
      throw ConfigError("cross_entropy: label " + std::to_string(label) + " outside [0," +
                        std::to_string(classes) + ")");
    total += -std::log(probs[b * classes + label]);
  }
  return total / static_cast<double>(batch);
}

Tensor softmax_cross_entropy_backward(const Tensor& probs, const std::vector<int>& labels) {
  const Index batch = probs.dim(0), classes = probs.dim(1);
  Tensor grad = probs;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (Index b = 0; b < batch; ++b) {
    grad[b * classes + labels[static_cast<std::size_t>(b)]] -= 1.0;
    for (Index j = 0; j < classes; ++j) grad[b * classes + j] *= inv_batch;
  }
  return grad;
}

}  // namespace rpsu
