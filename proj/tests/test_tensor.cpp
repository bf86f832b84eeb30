#include <doctest.h>

#include "repsu/rng.hpp"
#include "repsu/tensor.hpp"

using namespace rpsu;

namespace {

// Independent triple-loop product, kept apart from the Eigen-backed path.
Tensor matmul_naive(const Tensor& a, const Tensor& b) {
  Tensor out({a.dim(0), b.dim(1)});
  for (Index i = 0; i < a.dim(0); ++i)
    for (Index j = 0; j < b.dim(1); ++j) {
      double acc = 0.0;
      for (Index k = 0; k < a.dim(1); ++k) acc += a.at({i, k}) * b.at({k, j});
      out.at({i, j}) = acc;
    }
  return out;
}

Tensor random_tensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("zeros") {
  const Tensor t = zeros({2, 2});
  CHECK(t.size() == 4);
  for (Index i = 0; i < 4; ++i) CHECK(t[i] == 0.0);
  CHECK(zeros({1}).size() == 1);
  CHECK(zeros({3, 1, 2}).size() == 6);
  CHECK_THROWS_AS(zeros({}), ShapeError);
  CHECK_THROWS_AS(zeros({2, 0}), ShapeError);
  CHECK_THROWS_AS(zeros({-1}), ShapeError);
}

TEST_CASE("elementwise_map") {
  const Tensor t = from_values({3}, {1.0, 2.0, 3.0});
  const Tensor doubled = elementwise_map(t, [](double v) { return 2.0 * v; });
  CHECK(doubled[0] == 2.0);
  CHECK(doubled[1] == 4.0);
  CHECK(doubled[2] == 6.0);

  const Tensor same = elementwise_map(t, [](double v) { return v; });
  for (Index i = 0; i < t.size(); ++i) CHECK(same[i] == t[i]);

  const Tensor r = elementwise_map(from_values({2}, {-1.0, 2.0}),
                                   [](double v) { return v > 0.0 ? v : 0.0; });
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 2.0);
}

TEST_CASE("matmul basic") {
  const Tensor eye = from_values({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const Tensor a = from_values({2, 2}, {1.0, 2.0, 3.0, 4.0});
  const Tensor prod = matmul(eye, a);
  for (Index i = 0; i < 4; ++i) CHECK(prod[i] == a[i]);

  const Tensor row = from_values({1, 2}, {1.0, 0.0});
  const Tensor col = from_values({2, 1}, {5.0, 7.0});
  CHECK(matmul(row, col)[0] == 5.0);

  CHECK_THROWS_AS(matmul(from_values({1, 2}, {1, 2}), from_values({1, 2}, {1, 2})), ShapeError);
  CHECK_THROWS_AS(matmul(zeros({2}), zeros({2, 2})), ShapeError);
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(11);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 2}, rng);
  const Tensor fast = matmul(a, b);
  const Tensor slow = matmul_naive(a, b);
  for (Index i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
}

TEST_CASE("matmul associativity") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor({3, 5}, rng);
    const Tensor b = random_tensor({5, 4}, rng);
    const Tensor c = random_tensor({4, 2}, rng);
    const Tensor left = matmul(matmul(a, b), c);
    const Tensor right = matmul(a, matmul(b, c));
    for (Index i = 0; i < left.size(); ++i) {
      const double denom = std::max({std::abs(left[i]), std::abs(right[i]), 1e-30});
      CHECK(std::abs(left[i] - right[i]) / denom < 1e-12);
    }
  }
}

TEST_CASE("reshape round-trip") {
  Rng rng(13);
  const Tensor t = random_tensor({2, 3, 4}, rng);
  const Tensor back = reshape(reshape(t, {6, 4}), {2, 3, 4});
  CHECK(back.shape() == t.shape());
  for (Index i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
  CHECK_THROWS_AS(reshape(t, {5, 5}), ShapeError);
}

TEST_CASE("all_finite") {
  Tensor t = zeros({2, 2});
  CHECK(all_finite(t));
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(all_finite(t));
  t[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(t));
}
