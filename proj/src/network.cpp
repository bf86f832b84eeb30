#include "repsu/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "repsu/errors.hpp"

namespace rpsu {

namespace {

using nlohmann::json;

struct ShapeCursor {
  // Either a [C, H, W] feature map or a flat feature vector.
  Index channels = 0, height = 0, width = 0;
  bool flat = false;

  Index features() const noexcept { return flat ? channels : channels * height * width; }
};

void init_uniform(Tensor& t, double bound, Rng& rng) {
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

}  // namespace

NetworkSpec cnn1_spec(Index ncf, Index cfs, Family activation, Index num_classes,
                      std::array<Index, 3> input_shape) {
  NetworkSpec spec;
  spec.input_shape = input_shape;
  spec.num_classes = num_classes;
  spec.layers = {ConvSpec{ncf, cfs, 1, 0}, BatchNormSpec{}, ActivationLayerSpec{activation},
                 DenseSpec{num_classes}, SoftmaxSpec{}};
  return spec;
}

NetworkSpec cnn2_spec(Family activation, Index num_classes, std::array<Index, 3> input_shape) {
  NetworkSpec spec;
  spec.input_shape = input_shape;
  spec.num_classes = num_classes;
  auto stage = [&](Index filters, Index kernel, Family family) {
    spec.layers.push_back(ConvSpec{filters, kernel, 1, (kernel - 1) / 2});
    spec.layers.push_back(BatchNormSpec{});
    spec.layers.push_back(ActivationLayerSpec{family});
  };
  stage(96, 3, activation);
  stage(128, 5, Family::kReLU);
  stage(384, 7, Family::kReLU);
  stage(192, 5, Family::kReLU);
  stage(128, 3, Family::kReLU);
  spec.layers.push_back(DenseSpec{4096});
  spec.layers.push_back(ActivationLayerSpec{Family::kReLU});
  spec.layers.push_back(DenseSpec{num_classes});
  spec.layers.push_back(SoftmaxSpec{});
  return spec;
}

Network build_network(const NetworkSpec& spec, Rng& rng) {
  if (spec.num_classes < 2) throw ConfigError("network: num_classes must be at least 2");
  if (spec.layers.empty()) throw ConfigError("network: no layers");
  if (!std::holds_alternative<SoftmaxSpec>(spec.layers.back()))
    throw ConfigError("network: last layer must be the softmax head");
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i)
    if (std::holds_alternative<SoftmaxSpec>(spec.layers[i]))
      throw ConfigError("network: softmax head must be unique and last");

  Network net;
  net.spec = spec;
  ShapeCursor cur{spec.input_shape[2], spec.input_shape[0], spec.input_shape[1], false};

  for (const LayerSpec& ls : spec.layers) {
    if (const auto* conv = std::get_if<ConvSpec>(&ls)) {
      if (conv->filters < kMinFilters || conv->filters > kMaxFilters)
        throw ConfigError("conv filters " + std::to_string(conv->filters) + " outside [" +
                          std::to_string(kMinFilters) + "," + std::to_string(kMaxFilters) + "]");
      if (conv->kernel < kMinKernel || conv->kernel > kMaxKernel)
        throw ConfigError("conv kernel " + std::to_string(conv->kernel) + " outside [" +
                          std::to_string(kMinKernel) + "," + std::to_string(kMaxKernel) + "]");
      if (cur.flat) throw ConfigError("conv layer after flattening dense layer");
      const Index out_h = (cur.height + 2 * conv->padding - conv->kernel) / conv->stride + 1;
      const Index out_w = (cur.width + 2 * conv->padding - conv->kernel) / conv->stride + 1;
      if (cur.height + 2 * conv->padding < conv->kernel || out_h < 1 || out_w < 1)
        throw ConfigError("input " + std::to_string(cur.height) + "x" + std::to_string(cur.width) +
                          " too small for kernel " + std::to_string(conv->kernel));
      ConvLayer layer = make_conv(conv->filters, cur.channels, conv->kernel, conv->stride,
                                  conv->padding);
      const double bound = std::sqrt(6.0 / static_cast<double>(cur.channels * conv->kernel *
                                                               conv->kernel));
      init_uniform(layer.weights, bound, rng);
      net.layers.emplace_back(std::move(layer));
      cur.channels = conv->filters;
      cur.height = out_h;
      cur.width = out_w;
    } else if (const auto* bn = std::get_if<BatchNormSpec>(&ls)) {
      if (cur.flat) throw ConfigError("batchnorm after flattening dense layer");
      net.layers.emplace_back(make_batchnorm(cur.channels, bn->momentum, bn->epsilon));
    } else if (const auto* act = std::get_if<ActivationLayerSpec>(&ls)) {
      net.layers.emplace_back(make_activation(act->family, cur.channels));
    } else if (const auto* dense = std::get_if<DenseSpec>(&ls)) {
      if (dense->units < 1) throw ConfigError("dense units must be positive");
      DenseLayer layer = make_dense(dense->units, cur.features());
      init_uniform(layer.weights, std::sqrt(6.0 / static_cast<double>(cur.features())), rng);
      net.layers.emplace_back(std::move(layer));
      cur.channels = dense->units;
      cur.flat = true;
    } else {
      net.layers.emplace_back(SoftmaxLayer{});
    }
  }

  const auto* head = std::get_if<DenseSpec>(&spec.layers[spec.layers.size() - 2]);
  if (!head || head->units != spec.num_classes)
    throw ConfigError("network: classification head must be dense(num_classes) + softmax");
  return net;
}

ForwardResult forward(Network& net, const Tensor& batch, Mode mode) {
  if (batch.rank() != 4)
    throw ShapeError("forward expects [B,C,H,W], got " + shape_to_string(batch.shape()));
  const auto& in = net.spec.input_shape;
  if (batch.dim(1) != in[2] || batch.dim(2) != in[0] || batch.dim(3) != in[1])
    throw ShapeError("forward: batch " + shape_to_string(batch.shape()) +
                     " does not match input shape [" + std::to_string(in[0]) + "," +
                     std::to_string(in[1]) + "," + std::to_string(in[2]) + "]");

  ForwardResult fr;
  fr.caches.resize(net.layers.size());
  Tensor cur = batch;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& layer = net.layers[i];
    if (auto* conv = std::get_if<ConvLayer>(&layer)) {
      ConvCache cache;
      cur = conv_forward(*conv, cur, &cache);
      fr.caches[i] = std::move(cache);
    } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      BatchNormCache cache;
      cur = batchnorm_forward(*bn, cur, mode, mode == Mode::kTrain ? &cache : nullptr);
      fr.caches[i] = std::move(cache);
    } else if (auto* act = std::get_if<ActivationLayer>(&layer)) {
      ActCache cache{cur};
      cur = activation_forward(*act, cur);
      fr.caches[i] = std::move(cache);
    } else if (auto* dense = std::get_if<DenseLayer>(&layer)) {
      DenseCache cache{cur};
      cur = dense_forward(*dense, cur);
      fr.caches[i] = std::move(cache);
    }
    // softmax head: logits pass through; the loss and predict paths own it
  }
  fr.logits = std::move(cur);
  return fr;
}

GradientSet backward(const Network& net, const ForwardResult& fr, const std::vector<int>& labels) {
  GradientSet grads;
  grads.per_layer.resize(net.layers.size());

  const Tensor probs = softmax(fr.logits);
  Tensor delta = softmax_cross_entropy_backward(probs, labels);

  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const Layer& layer = net.layers[i];
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      ConvGrads g = conv_backward(*conv, std::get<ConvCache>(fr.caches[i]), delta);
      delta = std::move(g.d_input);
      g.d_input = Tensor();
      grads.per_layer[i] = std::move(g);
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      BatchNormGrads g = batchnorm_backward(*bn, std::get<BatchNormCache>(fr.caches[i]), delta);
      delta = std::move(g.d_input);
      g.d_input = Tensor();
      grads.per_layer[i] = std::move(g);
    } else if (const auto* act = std::get_if<ActivationLayer>(&layer)) {
      const Tensor& input = std::get<ActCache>(fr.caches[i]).input;
      ActivationLayerGrads g = activation_backward(*act, input, delta);
      delta = std::move(g.d_input);
      g.d_input = Tensor();
      grads.per_layer[i] = std::move(g);
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      const Tensor& input = std::get<DenseCache>(fr.caches[i]).input;
      DenseGrads g = dense_backward(*dense, input, delta);
      delta = std::move(g.d_input);
      g.d_input = Tensor();
      grads.per_layer[i] = std::move(g);
    }
  }
  return grads;
}

double loss_from_logits(const Tensor& logits, const std::vector<int>& labels) {
  return cross_entropy(softmax(logits), labels);
}

double batch_loss(Network& net, const Tensor& batch, const std::vector<int>& labels, Mode mode) {
  return loss_from_logits(forward(net, batch, mode).logits, labels);
}

std::vector<int> predict(Network& net, const Tensor& batch) {
  const Tensor probs = softmax(forward(net, batch, Mode::kInfer).logits);
  const Index rows = probs.dim(0), classes = probs.dim(1);
  std::vector<int> labels(static_cast<std::size_t>(rows));
  for (Index b = 0; b < rows; ++b) {
    const double* row = probs.data() + b * classes;
    int best = 0;
    for (Index j = 1; j < classes; ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    labels[static_cast<std::size_t>(b)] = best;
  }
  return labels;
}

bool is_activation_param(ParamKind kind) noexcept {
  switch (kind) {
    case ParamKind::kActLambda:
    case ParamKind::kActSigma:
    case ParamKind::kActMu:
    case ParamKind::kActAlpha:
    case ParamKind::kActXi: return true;
    default: return false;
  }
}

namespace {

ParamKind kind_for(ActParam p) {
  switch (p) {
    case ActParam::kLambda: return ParamKind::kActLambda;
    case ActParam::kSigma: return ParamKind::kActSigma;
    case ActParam::kMu: return ParamKind::kActMu;
    case ActParam::kAlpha: return ParamKind::kActAlpha;
    case ActParam::kXi: return ParamKind::kActXi;
  }
  return ParamKind::kActLambda;
}

double* grad_field_ptr(ScalarGrads& g, ActParam which) {
  switch (which) {
    case ActParam::kLambda: return &g.d_lambda;
    case ActParam::kSigma: return &g.d_sigma;
    case ActParam::kMu: return &g.d_mu;
    case ActParam::kAlpha: return &g.d_alpha;
    case ActParam::kXi: return &g.d_xi;
  }
  return nullptr;
}

}  // namespace

std::vector<ParamBinding> bind_parameters(Network& net, GradientSet* grads) {
  std::vector<ParamBinding> out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    Layer& layer = net.layers[i];
    if (auto* conv = std::get_if<ConvLayer>(&layer)) {
      ConvGrads* g = grads ? &std::get<ConvGrads>(grads->per_layer[i]) : nullptr;
      out.push_back({prefix + ".conv.weights", ParamKind::kWeights, conv->weights.data(),
                     g ? g->d_weights.data() : nullptr, conv->weights.size()});
      out.push_back({prefix + ".conv.bias", ParamKind::kBias, conv->bias.data(),
                     g ? g->d_bias.data() : nullptr, conv->bias.size()});
    } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      BatchNormGrads* g = grads ? &std::get<BatchNormGrads>(grads->per_layer[i]) : nullptr;
      out.push_back({prefix + ".bn.gamma", ParamKind::kBnGamma, bn->gamma.data(),
                     g ? g->d_gamma.data() : nullptr, bn->gamma.size()});
      out.push_back({prefix + ".bn.beta", ParamKind::kBnBeta, bn->beta_shift.data(),
                     g ? g->d_beta_shift.data() : nullptr, bn->beta_shift.size()});
    } else if (auto* act = std::get_if<ActivationLayer>(&layer)) {
      ActivationLayerGrads* g =
          grads ? &std::get<ActivationLayerGrads>(grads->per_layer[i]) : nullptr;
      for (std::size_t c = 0; c < act->spec_per_channel.size(); ++c) {
        for (ActParam which : learnable_params(act->spec_per_channel[c].family)) {
          out.push_back({prefix + ".act." + act_param_name(which) + "[" + std::to_string(c) + "]",
                         kind_for(which), param_field(act->spec_per_channel[c].params, which),
                         g ? grad_field_ptr(g->d_params[c], which) : nullptr, 1});
        }
      }
    } else if (auto* dense = std::get_if<DenseLayer>(&layer)) {
      DenseGrads* g = grads ? &std::get<DenseGrads>(grads->per_layer[i]) : nullptr;
      out.push_back({prefix + ".dense.weights", ParamKind::kWeights, dense->weights.data(),
                     g ? g->d_weights.data() : nullptr, dense->weights.size()});
      out.push_back({prefix + ".dense.bias", ParamKind::kBias, dense->bias.data(),
                     g ? g->d_bias.data() : nullptr, dense->bias.size()});
    }
  }
  return out;
}

Index parameter_count(const Network& net) {
  Index total = 0;
  for (const ParamBinding& b : bind_parameters(const_cast<Network&>(net))) total += b.count;
  return total;
}

namespace {

json layer_spec_to_json(const LayerSpec& ls) {
  json j;
  if (const auto* conv = std::get_if<ConvSpec>(&ls)) {
    j["kind"] = "conv";
    j["filters"] = conv->filters;
    j["kernel"] = conv->kernel;
    j["stride"] = conv->stride;
    j["padding"] = conv->padding;
  } else if (const auto* bn = std::get_if<BatchNormSpec>(&ls)) {
    j["kind"] = "batchnorm";
    j["momentum"] = bn->momentum;
    j["epsilon"] = bn->epsilon;
  } else if (const auto* act = std::get_if<ActivationLayerSpec>(&ls)) {
    j["kind"] = "activation";
    j["family"] = family_name(act->family);
  } else if (const auto* dense = std::get_if<DenseSpec>(&ls)) {
    j["kind"] = "dense";
    j["units"] = dense->units;
  } else {
    j["kind"] = "softmax";
  }
  return j;
}

LayerSpec layer_spec_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "conv")
    return ConvSpec{j.at("filters").get<Index>(), j.at("kernel").get<Index>(),
                    j.value("stride", Index{1}), j.value("padding", Index{0})};
  if (kind == "batchnorm") return BatchNormSpec{j.value("momentum", 0.9), j.value("epsilon", 1e-5)};
  if (kind == "activation") {
    const auto family = family_from_name(j.at("family").get<std::string>());
    if (!family) throw FormatError("network spec: unknown activation family " + j.dump());
    return ActivationLayerSpec{*family};
  }
  if (kind == "dense") return DenseSpec{j.at("units").get<Index>()};
  if (kind == "softmax") return SoftmaxSpec{};
  throw FormatError("network spec: unknown layer kind \"" + kind + "\"");
}

// State tensors in save order: name, borrowed flat values, element count.
struct StateEntry {
  std::string name;
  Shape shape;
  std::vector<double> gathered;  // used for activation scalars
  const double* values = nullptr;
  Index count = 0;
};

std::vector<StateEntry> state_entries(const Network& net) {
  std::vector<StateEntry> out;
  auto add = [&](std::string name, const Tensor& t) {
    out.push_back({std::move(name), t.shape(), {}, t.data(), t.size()});
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    const Layer& layer = net.layers[i];
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      add(prefix + ".conv.weights", conv->weights);
      add(prefix + ".conv.bias", conv->bias);
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      add(prefix + ".bn.gamma", bn->gamma);
      add(prefix + ".bn.beta", bn->beta_shift);
      add(prefix + ".bn.running_mean", bn->running_mean);
      add(prefix + ".bn.running_var", bn->running_var);
    } else if (const auto* act = std::get_if<ActivationLayer>(&layer)) {
      if (act->spec_per_channel.empty()) continue;
      const Family family = act->spec_per_channel.front().family;
      for (const ActivationSpec& spec : act->spec_per_channel)
        if (spec.family != family)
          throw ConfigError("layer " + std::to_string(i) +
                            ": mixed activation families per layer are not serializable");
      const Index channels = act->channels();
      for (ActParam which : learnable_params(family)) {
        StateEntry e;
        e.name = prefix + ".act." + act_param_name(which);
        e.shape = {channels};
        e.gathered.resize(static_cast<std::size_t>(channels));
        for (Index c = 0; c < channels; ++c)
          e.gathered[static_cast<std::size_t>(c)] =
              param_field(act->spec_per_channel[static_cast<std::size_t>(c)].params, which);
        e.values = e.gathered.data();
        e.count = channels;
        out.push_back(std::move(e));
      }
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      add(prefix + ".dense.weights", dense->weights);
      add(prefix + ".dense.bias", dense->bias);
    }
  }
  return out;
}

}  // namespace

std::string network_spec_to_json(const NetworkSpec& spec) {
  json j;
  j["input_shape"] = spec.input_shape;
  j["num_classes"] = spec.num_classes;
  j["layers"] = json::array();
  for (const LayerSpec& ls : spec.layers) j["layers"].push_back(layer_spec_to_json(ls));
  return j.dump(2);
}

NetworkSpec network_spec_from_json(const std::string& text) {
  json j = json::parse(text);
  NetworkSpec spec;
  const auto in = j.at("input_shape");
  spec.input_shape = {in.at(0).get<Index>(), in.at(1).get<Index>(), in.at(2).get<Index>()};
  spec.num_classes = j.at("num_classes").get<Index>();
  for (const json& lj : j.at("layers")) spec.layers.push_back(layer_spec_from_json(lj));
  return spec;
}

void save_network(const Network& net, const std::string& spec_path,
                  const std::string& weights_path) {
  const auto entries = state_entries(net);

  json j = json::parse(network_spec_to_json(net.spec));
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const StateEntry& e : entries) {
    json m;
    m["name"] = e.name;
    m["shape"] = e.shape;
    m["offset"] = offset;
    m["count"] = e.count;
    manifest.push_back(m);
    offset += static_cast<std::uint64_t>(e.count) * sizeof(double);
  }
  j["manifest"] = manifest;

  std::ofstream spec_out(spec_path);
  if (!spec_out) throw ConfigError("cannot write " + spec_path);
  spec_out << j.dump(2) << "\n";

  std::ofstream bin(weights_path, std::ios::binary);
  if (!bin) throw ConfigError("cannot write " + weights_path);
  for (const StateEntry& e : entries)
    bin.write(reinterpret_cast<const char*>(e.values),
              static_cast<std::streamsize>(e.count * sizeof(double)));
}

Network load_network(const std::string& spec_path, const std::string& weights_path) {
  std::ifstream spec_in(spec_path);
  if (!spec_in) throw ConfigError("cannot read " + spec_path);
  std::stringstream buf;
  buf << spec_in.rdbuf();
  json j = json::parse(buf.str());

  Rng rng(0);  // placeholder weights, overwritten below
  Network net = build_network(network_spec_from_json(buf.str()), rng);

  std::ifstream bin(weights_path, std::ios::binary);
  if (!bin) throw ConfigError("cannot read " + weights_path);
  std::vector<char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  // Scatter by name through the manifest; every state tensor must be covered.
  auto entries = state_entries(net);
  std::size_t matched = 0;
  for (const json& m : j.at("manifest")) {
    const std::string name = m.at("name").get<std::string>();
    const std::uint64_t offset = m.at("offset").get<std::uint64_t>();
    const Index count = m.at("count").get<Index>();
    if (offset + static_cast<std::uint64_t>(count) * sizeof(double) > blob.size())
      throw LengthError("weights blob shorter than manifest entry " + name);
    const StateEntry* target = nullptr;
    for (const StateEntry& e : entries)
      if (e.name == name) target = &e;
    if (!target) throw FormatError("manifest entry " + name + " not present in architecture");
    if (target->count != count)
      throw ConsistencyError("manifest entry " + name + " count mismatch");
    std::memcpy(const_cast<double*>(target->values), blob.data() + offset,
                static_cast<std::size_t>(count) * sizeof(double));
    ++matched;
  }
  if (matched != entries.size())
    throw ConsistencyError("manifest covers " + std::to_string(matched) + " of " +
                           std::to_string(entries.size()) + " state tensors");

  // Scatter gathered activation arrays back into per-channel specs.
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (auto* act = std::get_if<ActivationLayer>(&net.layers[i])) {
      if (act->spec_per_channel.empty()) continue;
      const Family family = act->spec_per_channel.front().family;
      const std::string prefix = "layer" + std::to_string(i) + ".act.";
      for (ActParam which : learnable_params(family)) {
        for (const StateEntry& e : entries)
          if (e.name == prefix + act_param_name(which))
            for (Index c = 0; c < act->channels(); ++c)
              *param_field(act->spec_per_channel[static_cast<std::size_t>(c)].params, which) =
                  e.values[c];
      }
    }
  }
  return net;
}

}  // namespace rpsu
