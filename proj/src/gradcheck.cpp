#include "repsu/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "repsu/errors.hpp"
#include "repsu/network.hpp"
#include "repsu/rng.hpp"

namespace rpsu {

namespace {

double checked_eval(const std::function<double(double)>& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v))
    throw DivergenceError("fd_scalar", "non-finite function value at x=" + std::to_string(x));
  return v;
}

// How fast the sigmoid-factor exponent moves with one coordinate; used to
// size finite-difference steps so the stencil shifts the exponent by ~0.05.
double exponent_rate(const ActivationSpec& spec, double x, ActParam which, bool wrt_input) {
  const ActivationParams& p = spec.params;
  switch (spec.family) {
    case Family::kReSKU:
      if (wrt_input) return p.xi;
      if (which == ActParam::kXi) return std::abs(x - p.mu);
      if (which == ActParam::kMu) return p.xi;
      return 1.0;
    case Family::kRePSKU:
    case Family::kRePSHU:
    case Family::kRePSU: {
      const double dzdx = std::abs(power_exponent_dx(x, p));
      if (wrt_input || which == ActParam::kMu) return dzdx;
      // the exponent's sigma-derivatives carry a 1/sigma pole
      if (which == ActParam::kSigma)
        return std::abs(p.beta * power_exponent(x, p) / p.sigma) + 4.0 / p.sigma;
      return 1.0;
    }
    case Family::kPMISH:
      if (wrt_input) return p.xi;
      // softplus(xi x)/xi carries a 1/xi pole in its xi-derivatives
      if (which == ActParam::kXi) return std::abs(x) + 4.0 / p.xi;
      return 1.0;
    case Family::kPSWISH:
      if (wrt_input) return p.xi;
      if (which == ActParam::kXi) return std::abs(x);
      return 1.0;
    default:
      return 1.0;
  }
}

double stencil_step(const ActivationSpec& spec, double x, double rate, bool along_shift_cusp) {
  double h = std::min(0.01, 0.05 / std::max(1.0, rate));
  // |x - mu|^beta has unbounded higher derivatives at the cusp for
  // non-integer beta; keep the stencil small relative to the distance.
  if (along_shift_cusp && spec.params.beta != 1.0) {
    switch (spec.family) {
      case Family::kRePSKU:
      case Family::kRePSHU:
      case Family::kRePSU:
        h = std::min(h, 0.02 * std::abs(x - spec.params.mu));
        break;
      default:
        break;
    }
  }
  return h;
}

bool has_threshold(Family f) {
  switch (f) {
    case Family::kReLU:
    case Family::kReSKU:
    case Family::kRePSKU:
    case Family::kRePSHU:
    case Family::kRePSU: return true;
    default: return false;
  }
}

bool has_shift_kink(Family f) {
  // The power exponent is non-smooth at x == mu unless beta == 1.
  return f == Family::kRePSKU || f == Family::kRePSHU || f == Family::kRePSU;
}

std::string describe_point(const ActivationSpec& spec, double x, const std::string& wrt) {
  std::ostringstream os;
  os << family_name(spec.family) << " x=" << x;
  const ActivationParams& p = spec.params;
  if (has_threshold(spec.family) && spec.family != Family::kReLU) os << " lambda=" << p.lambda;
  switch (spec.family) {
    case Family::kReSKU: os << " xi=" << p.xi << " mu=" << p.mu; break;
    case Family::kRePSKU:
    case Family::kRePSHU:
      os << " sigma=" << p.sigma << " mu=" << p.mu << " beta=" << p.beta;
      break;
    case Family::kRePSU:
      os << " sigma=" << p.sigma << " mu=" << p.mu << " beta=" << p.beta << " alpha=" << p.alpha;
      break;
    case Family::kPMISH:
    case Family::kPSWISH: os << " xi=" << p.xi; break;
    default: break;
  }
  os << " wrt=" << wrt;
  return os.str();
}

}  // namespace

double fd_scalar(const std::function<double(double)>& f, double x, double h) {
  return (checked_eval(f, x + h) - checked_eval(f, x - h)) / (2.0 * h);
}

double fd_scalar4(const std::function<double(double)>& f, double x, double h) {
  const double f2p = checked_eval(f, x + 2.0 * h);
  const double f1p = checked_eval(f, x + h);
  const double f1m = checked_eval(f, x - h);
  const double f2m = checked_eval(f, x - 2.0 * h);
  return (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
}

GradCheckReport check_activation(const ActivationSpec& spec, std::span<const double> xs,
                                 double tol) {
  GradCheckReport report;
  report.name = family_name(spec.family);
  report.tolerance = tol;

  const ActivationParams& base = spec.params;
  const auto learnables = learnable_params(spec.family);

  auto consider = [&](double analytic, double fd, const ActivationSpec& at, double x,
                      const std::string& wrt) {
    const double err = rel_error(analytic, fd);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_point = describe_point(at, x, wrt);
    }
  };

  // Near a derivative zero crossing the relative tolerance needs extra
  // truncation headroom; the trigger uses only the difference quotient, so
  // the oracle stays independent of the analytic value it judges.
  auto refined_fd = [](const std::function<double(double)>& f, double at, double h) {
    const double fd = fd_scalar4(f, at, h);
    const double mag = std::abs(fd);
    if (mag > 1e-4 && mag < 0.1) return fd_scalar4(f, at, h / 4.0);
    return fd;
  };

  for (double x : xs) {
    constexpr double kKinkGuard = 0.05;
    if (has_threshold(spec.family)) {
      const double thr = spec.family == Family::kReLU ? 0.0 : base.lambda;
      if (std::abs(x - thr) < kKinkGuard) continue;
    }
    if (has_shift_kink(spec.family) && std::abs(x - base.mu) < kKinkGuard) continue;

    const ScalarGrads analytic = activation_grads(spec, x);

    const double hx = stencil_step(
        spec, x, exponent_rate(spec, x, ActParam::kLambda, /*wrt_input=*/true), true);
    const double fd_input =
        refined_fd([&](double v) { return activation_value(spec, v); }, x, hx);
    consider(analytic.d_input, fd_input, spec, x, "input");

    for (ActParam which : learnables) {
      const double h = stencil_step(spec, x, exponent_rate(spec, x, which, /*wrt_input=*/false),
                                    which == ActParam::kMu);
      const double fd = refined_fd(
          [&](double v) {
            ActivationSpec moved = spec;
            *param_field(moved.params, which) = v;
            return activation_value(moved, x);
          },
          param_field(base, which), h);
      consider(grad_field(analytic, which), fd, spec, x, act_param_name(which));
    }
  }

  report.passed = report.max_rel_error <= tol;
  return report;
}

std::vector<ActivationSpec> gradcheck_grid(Family f) {
  std::vector<ActivationSpec> grid;
  auto push = [&](ActivationParams p) { grid.push_back({f, p}); };

  switch (f) {
    case Family::kReLU:
    case Family::kSigmoid:
    case Family::kMISH:
    case Family::kSWISH:
      push({});
      break;
    case Family::kPMISH:
      // The outer tanh and the inner sigmoid saturate jointly for large
      // xi * x; xi values keep the xi-partial resolvable over x in [-5, 5].
      for (double xi : {0.4, 0.8, 1.2}) {
        ActivationParams p;
        p.xi = xi;
        push(p);
      }
      break;
    case Family::kPSWISH:
      for (double xi : {0.5, 1.0, 3.0}) {
        ActivationParams p;
        p.xi = xi;
        push(p);
      }
      break;
    case Family::kReSKU:
      for (double lambda : {0.0, 1.0})
        for (double xi : {0.5, 1.0, 3.0})
          for (double mu : {-1.0, 0.0, 2.0}) {
            ActivationParams p;
            p.lambda = lambda;
            p.xi = xi;
            p.mu = mu;
            push(p);
          }
      break;
    case Family::kRePSKU:
    case Family::kRePSHU:
    case Family::kRePSU: {
      static constexpr std::pair<double, double> kScaleShape[] = {
          {0.4, 1.0}, {1.0, 1.0}, {2.0, 1.0}, {1.0, 1.5}, {2.0, 1.5}, {1.7, 2.0}, {2.5, 2.0}};
      for (double lambda : {0.0, 1.0})
        for (auto [sigma, beta] : kScaleShape)
          for (double mu : {-1.0, 0.0, 2.0}) {
            ActivationParams p;
            p.lambda = lambda;
            p.sigma = sigma;
            p.beta = beta;
            p.mu = mu;
            if (f == Family::kRePSU) {
              for (double alpha : {0.0, 0.3, 0.7, 1.0}) {
                p.alpha = alpha;
                push(p);
              }
            } else {
              push(p);
            }
          }
      break;
    }
  }
  return grid;
}

std::vector<double> default_x_grid() {
  std::vector<double> xs;
  for (int i = -50; i <= 50; ++i) xs.push_back(i * 0.1);
  return xs;
}

GradCheckReport check_family(Family f, double tol) {
  GradCheckReport report;
  report.name = family_name(f);
  report.tolerance = tol;
  const auto xs = default_x_grid();
  for (const ActivationSpec& spec : gradcheck_grid(f)) {
    GradCheckReport one = check_activation(spec, xs, tol);
    if (one.max_rel_error > report.max_rel_error) {
      report.max_rel_error = one.max_rel_error;
      report.worst_point = one.worst_point;
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

GradCheckReport check_network(Network& net, const Tensor& images, const std::vector<int>& labels,
                              int n_samples, double tol, std::uint64_t seed) {
  GradCheckReport report;
  report.name = "network";
  report.tolerance = tol;

  // Running averages drift under repeated train-mode evaluations; keep a copy.
  std::vector<std::pair<Tensor, Tensor>> saved_stats;
  for (Layer& layer : net.layers)
    if (auto* bn = std::get_if<BatchNormLayer>(&layer))
      saved_stats.emplace_back(bn->running_mean, bn->running_var);

  ForwardResult fr = forward(net, images, Mode::kTrain);
  GradientSet grads = backward(net, fr, labels);
  auto bindings = bind_parameters(net, &grads);

  // A bias feeding straight into batch normalization is absorbed by the mean
  // subtraction: its true gradient is identically zero, which sits below what
  // differences of the loss can resolve. Excluded structurally.
  std::vector<std::string> absorbed;
  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i)
    if (std::holds_alternative<ConvLayer>(net.layers[i]) &&
        std::holds_alternative<BatchNormLayer>(net.layers[i + 1]))
      absorbed.push_back("layer" + std::to_string(i) + ".conv.bias");
  auto is_absorbed = [&](const std::string& name) {
    for (const std::string& a : absorbed)
      if (a == name) return true;
    return false;
  };

  struct Sample {
    std::size_t binding;
    Index element;
  };
  std::vector<Sample> samples;
  Rng rng(seed);

  // The first channel of each parametric activation layer is always covered.
  for (std::size_t b = 0; b < bindings.size(); ++b) {
    if (!is_activation_param(bindings[b].kind)) continue;
    if (!bindings[b].name.ends_with("[0]")) continue;
    samples.push_back({b, 0});
  }
  while (static_cast<int>(samples.size()) < n_samples) {
    const std::size_t b = static_cast<std::size_t>(rng.next_u64() % bindings.size());
    if (is_absorbed(bindings[b].name)) continue;
    const Index e = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(
                                                            bindings[b].count));
    samples.push_back({b, e});
  }

  for (const Sample& s : samples) {
    ParamBinding& b = bindings[s.binding];
    double& p = b.values[s.element];
    const double analytic = b.grads[s.element];
    const double saved = p;
    const double h = 1e-5 * std::max(1.0, std::abs(saved));
    p = saved + h;
    const double loss_plus = batch_loss(net, images, labels, Mode::kTrain);
    p = saved - h;
    const double loss_minus = batch_loss(net, images, labels, Mode::kTrain);
    p = saved;
    const double fd = (loss_plus - loss_minus) / (2.0 * h);
    const double err = rel_error(analytic, fd);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_point = b.name + "[" + std::to_string(s.element) + "]";
    }
  }

  std::size_t stat_idx = 0;
  for (Layer& layer : net.layers)
    if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      bn->running_mean = saved_stats[stat_idx].first;
      bn->running_var = saved_stats[stat_idx].second;
      ++stat_idx;
    }

  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace rpsu
