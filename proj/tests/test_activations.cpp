#include <doctest.h>

#include <cmath>

#include "repsu/activations.hpp"
#include "repsu/errors.hpp"
#include "repsu/gradcheck.hpp"
#include "repsu/rng.hpp"

#include <vector>

using namespace rpsu;

namespace {

ActivationParams resku_params(double lambda, double xi, double mu) {
  ActivationParams p;
  p.lambda = lambda;
  p.xi = xi;
  p.mu = mu;
  return p;
}

ActivationParams power_params(double lambda, double sigma, double mu, double beta,
                              double alpha = 0.0) {
  ActivationParams p;
  p.lambda = lambda;
  p.sigma = sigma;
  p.mu = mu;
  p.beta = beta;
  p.alpha = alpha;
  return p;
}

}  // namespace

TEST_CASE("relu") {
  CHECK(relu(-1.5) == 0.0);
  CHECK(relu(0.0) == 0.0);
  CHECK(relu(3.2) == 3.2);
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-30.0, 30.0);
    CHECK(sigmoid(x) == doctest::Approx(1.0 - sigmoid(-x)).epsilon(1e-14));
  }
  CHECK(sigmoid(100.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isfinite(sigmoid(800.0)));
  CHECK(std::isfinite(sigmoid(-800.0)));
  const double v = sigmoid(50.0);
  CHECK(v > 0.0);
  CHECK(v <= 1.0);
}

TEST_CASE("indicator_ge") {
  CHECK(indicator_ge(2.0, 0.0) == 1.0);
  CHECK(indicator_ge(0.0, 0.0) == 1.0);  // boundary included
  CHECK(indicator_ge(-0.1, 0.0) == 0.0);
}

TEST_CASE("repsku evaluation") {
  // exponent vanishes at x == mu: value (x - lambda) / 2 exactly
  for (double sigma : {0.3, 1.0, 2.5})
    for (double beta : {0.7, 1.0, 2.0})
      CHECK(repsku(2.0, power_params(0.0, sigma, 2.0, beta)) == 1.0);
  CHECK(repsku(-3.0, power_params(0.0, 1.0, 0.0, 1.0)) == 0.0);
  // frozen: 1 / (1 + e^{-1})
  CHECK(repsku(1.0, power_params(0.0, 1.0, 0.0, 1.0)) ==
        doctest::Approx(0.7310585786300049).epsilon(1e-15));
}

TEST_CASE("repshu and repsu evaluation") {
  CHECK(repshu(2.0, power_params(0.0, 1.0, 2.0, 1.0)) == 3.0);
  CHECK(repshu(-1.0, power_params(0.0, 1.0, 0.0, 1.0)) == 0.0);

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const ActivationParams p =
        power_params(rng.uniform(-2.0, 2.0), rng.uniform(0.3, 3.0), rng.uniform(-2.0, 2.0),
                     rng.uniform(0.5, 3.0), rng.uniform(0.0, 1.0));
    const double x = rng.uniform(-6.0, 6.0);
    // complement: f + g == 2x 1l
    CHECK(repsku(x, p) + repshu(x, p) ==
          doctest::Approx(2.0 * x * indicator_ge(x, p.lambda)).epsilon(1e-12));
    // mixing endpoints
    ActivationParams lo = p;
    lo.alpha = 0.0;
    ActivationParams hi = p;
    hi.alpha = 1.0;
    CHECK(repsu(x, lo) == repsku(x, lo));
    CHECK(repsu(x, hi) == repshu(x, hi));
  }
  CHECK(repsu(2.0, power_params(0.0, 1.0, 2.0, 1.0, 0.5)) == 2.0);
}

TEST_CASE("resku equals repsku at sigma = 1/xi, beta = 1") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const double lambda = rng.uniform(-2.0, 2.0);
    const double xi = rng.uniform(0.1, 5.0);
    const double mu = rng.uniform(-2.0, 2.0);
    const double x = rng.uniform(-6.0, 6.0);
    const double via_resku = resku(x, resku_params(lambda, xi, mu));
    const double via_repsku = repsku(x, power_params(lambda, 1.0 / xi, mu, 1.0));
    CHECK(via_resku == doctest::Approx(via_repsku).epsilon(1e-12));
  }
}

TEST_CASE("resku special cases") {
  // swish at lambda = mu = 0, xi = 1, on the non-negative axis
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(0.0, 8.0);
    CHECK(resku(x, resku_params(0.0, 1.0, 0.0)) == doctest::Approx(pswish(x, 1.0)).epsilon(1e-15));
  }
  // steep sigmoid: relu away from the kink
  CHECK(resku(0.5, resku_params(0.0, 1e4, 0.0)) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("resku_dx closed form") {
  // s = 1/2 at x == mu gives 1/2 + xi (x - lambda) / 4
  CHECK(resku_dx(2.0, resku_params(0.0, 1.0, 2.0)) == 1.0);
  const auto f = [](double v) { return resku(v, resku_params(0.0, 1.0, 2.0)); };
  CHECK(fd_scalar(f, 2.0, 1e-6) == doctest::Approx(1.0).epsilon(1e-7));

  CHECK(resku_dx(-5.0, resku_params(0.0, 1.0, 0.0)) == 0.0);
  // at the threshold itself the dead branch wins
  CHECK(resku_dx(0.0, resku_params(0.0, 1.0, 0.0)) == 0.0);
  CHECK(resku_dx(50.0, resku_params(0.0, 1.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("saturated exponents clamp instead of overflowing") {
  // far past the clamp the sigmoid factor is exactly 1 (or 0 on the other side)
  CHECK(repsku(100.0, power_params(0.0, 1e-3, 0.0, 2.0)) == 100.0);
  CHECK(repsku(1.0, power_params(0.0, 1e-3, 2.0, 2.0)) == 0.0);
  CHECK(std::isfinite(repshu(1.0, power_params(0.0, 1e-3, 2.0, 2.0))));
  CHECK(resku_dx(1.0, resku_params(0.0, 1e6, 2.0)) == 0.0);
  CHECK(std::isfinite(resku(500.0, resku_params(0.0, 2.0, 0.0))));
}

TEST_CASE("repsu_dx consistency") {
  // beta = 1, alpha = 0 reduces to the closed-form resku derivative
  for (int i = 0; i <= 100; ++i) {
    const double x = -5.0 + 0.1 * i;
    if (std::abs(x) < 1e-3) continue;
    const ActivationParams pr = resku_params(0.0, 2.0, 0.5);
    const ActivationParams pp = power_params(0.0, 0.5, 0.5, 1.0, 0.0);
    CHECK(repsu_dx(x, pp) == doctest::Approx(resku_dx(x, pr)).epsilon(1e-12));
    // alpha = 1: d(2x - f)/dx
    ActivationParams hi = pp;
    hi.alpha = 1.0;
    if (x > 0.0) CHECK(repsu_dx(x, hi) == doctest::Approx(2.0 - resku_dx(x, pr)).epsilon(1e-12));
  }
}

TEST_CASE("repsu derivatives match the difference-quotient oracle at random points") {
  // The exponent is kept inside the span a double-precision quotient can
  // resolve: beyond |z| ~ 20 the sigmoid factor is flat to machine precision
  // and saturation is covered by the exact-value cases above.
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    ActivationSpec spec;
    spec.family = Family::kRePSU;
    spec.params.lambda = rng.uniform(-1.0, 1.0);
    spec.params.beta = rng.uniform(1.0, 2.0);
    spec.params.sigma = rng.uniform(1.2, 2.5);
    spec.params.mu = rng.uniform(-1.0, 1.0);
    spec.params.alpha = rng.uniform(0.0, 1.0);
    std::vector<double> xs;
    for (int i = 0; i < 4; ++i) xs.push_back(rng.uniform(-4.0, 4.0));
    const GradCheckReport r = check_activation(spec, xs, 1e-6);
    INFO("max_rel_error=", r.max_rel_error, " worst=", r.worst_point);
    CHECK(r.passed);
  }
}

TEST_CASE("repsu_dparams landmark values") {
  // d alpha at x = mu = 2, lambda = 0: g - f = 3 - 1
  CHECK(repsu_grads(2.0, power_params(0.0, 1.0, 2.0, 1.0, 0.3)).d_alpha == 2.0);
  // below threshold everything is dead
  const ScalarGrads g = repsu_grads(-1.0, power_params(0.0, 1.0, 0.0, 1.0, 0.3));
  CHECK(g.d_lambda == 0.0);
  CHECK(g.d_input == 0.0);
  CHECK(g.d_sigma == 0.0);
  CHECK(g.d_mu == 0.0);
  CHECK(g.d_alpha == 0.0);
}

TEST_CASE("pmish and mish") {
  for (double xi : {0.3, 1.0, 4.0}) CHECK(pmish(0.0, xi) == 0.0);
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-8.0, 8.0);
    CHECK(pmish(x, 1.0) == mish(x));
  }
  CHECK(pmish(700.0, 1.0) == doctest::Approx(700.0).epsilon(1e-9));
  CHECK(std::isfinite(pmish(5000.0, 2.0)));
  CHECK(std::isfinite(pmish(-5000.0, 2.0)));
}

TEST_CASE("pswish and swish") {
  for (double xi : {0.3, 1.0, 4.0}) CHECK(pswish(0.0, xi) == 0.0);
  Rng rng(33);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-8.0, 8.0);
    CHECK(pswish(x, 1.0) == swish(x));
  }
  // tiny but nonzero for large negative inputs
  const double far = pswish(-50.0, 1.0);
  CHECK(far != 0.0);
  CHECK(far == doctest::Approx(-50.0 * std::exp(-50.0)).epsilon(1e-12));
}

TEST_CASE("pmish/pswish derivatives") {
  CHECK(pswish_dx(0.0, 1.0) == 0.5);
  for (double xi : {0.5, 1.0, 3.0}) CHECK(pswish_dxi(0.0, xi) == 0.0);

  Rng rng(35);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-3.0, 3.0);
    const double xi = rng.uniform(0.3, 2.0);
    CHECK(rel_error(pswish_dx(x, xi),
                    fd_scalar([&](double v) { return pswish(v, xi); }, x, fd_step(x))) < 1e-6);
    CHECK(rel_error(pswish_dxi(x, xi),
                    fd_scalar([&](double v) { return pswish(x, v); }, xi, fd_step(xi))) < 1e-6);
    CHECK(rel_error(pmish_dx(x, xi),
                    fd_scalar([&](double v) { return pmish(v, xi); }, x, fd_step(x))) < 1e-6);
    CHECK(rel_error(pmish_dxi(x, xi),
                    fd_scalar([&](double v) { return pmish(x, v); }, xi, fd_step(xi))) < 1e-6);
  }
}

TEST_CASE("activation spec json round-trip") {
  ActivationSpec spec;
  spec.family = Family::kReSKU;
  spec.params = resku_params(0.25, 1.5, -0.75);
  const ActivationSpec back = activation_spec_from_json(activation_spec_to_json(spec));
  CHECK(back.family == Family::kReSKU);
  CHECK(back.params.lambda == 0.25);
  CHECK(back.params.xi == 1.5);
  CHECK(back.params.mu == -0.75);

  // absent fields default per family
  const ActivationSpec relu_spec = activation_spec_from_json(R"({"family":"relu"})");
  CHECK(relu_spec.family == Family::kReLU);
  const ActivationSpec repsu_spec = activation_spec_from_json(R"({"family":"repsu"})");
  CHECK(repsu_spec.params.alpha == 0.5);
  CHECK(repsu_spec.params.sigma == 1.0);
  CHECK(repsu_spec.params.beta == 1.0);
  const ActivationSpec pmish_spec = activation_spec_from_json(R"({"family":"pmish"})");
  CHECK(pmish_spec.params.xi == 1.0);

  CHECK_THROWS_AS(activation_spec_from_json(R"({"family":"nope"})"), FormatError);
  CHECK_THROWS_AS(activation_spec_from_json(R"({"lambda":1})"), FormatError);
}

TEST_CASE("family names") {
  for (Family f : all_families()) CHECK(family_from_name(family_name(f)) == f);
  CHECK_FALSE(family_from_name("tanh").has_value());
  CHECK(learnable_params(Family::kReLU).empty());
  CHECK(learnable_params(Family::kReSKU).size() == 3);
  CHECK(learnable_params(Family::kRePSU).size() == 4);
  CHECK(learnable_params(Family::kPSWISH).size() == 1);
}
