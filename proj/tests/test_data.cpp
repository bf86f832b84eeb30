#include <doctest.h>

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "repsu/data.hpp"
#include "repsu/errors.hpp"

using namespace rpsu;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "repsu_data_tests";
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void push_u32_be(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

// Two 3x3 images with raw pixel bytes 0..17 and labels {4, 9}.
std::pair<std::vector<unsigned char>, std::vector<unsigned char>> tiny_fixture() {
  std::vector<unsigned char> images;
  push_u32_be(images, 0x00000803);
  push_u32_be(images, 2);
  push_u32_be(images, 3);
  push_u32_be(images, 3);
  for (int i = 0; i < 18; ++i) images.push_back(static_cast<unsigned char>(i * 13));
  std::vector<unsigned char> labels;
  push_u32_be(labels, 0x00000801);
  push_u32_be(labels, 2);
  labels.push_back(4);
  labels.push_back(9);
  return {images, labels};
}

// Ridge regression to one-hot targets; completely separate from the CNN path.
double linear_probe_accuracy(const Dataset& ds) {
  const Index n = ds.size();
  const Index d = ds.images.dim(2) * ds.images.dim(3);
  Eigen::MatrixXd x(n, d + 1);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = ds.images[i * d + j];
    x(i, d) = 1.0;
  }
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, ds.num_classes);
  for (Index i = 0; i < n; ++i) y(i, ds.labels[static_cast<std::size_t>(i)]) = 1.0;

  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += 1e-3;
  const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);
  const Eigen::MatrixXd scores = x * w;
  Index correct = 0;
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    scores.row(i).maxCoeff(&best);
    if (static_cast<int>(best) == ds.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("idx load and byte-exact round-trip") {
  const auto dir = temp_dir();
  const auto [images, labels] = tiny_fixture();
  write_bytes(dir / "img.idx", images);
  write_bytes(dir / "lbl.idx", labels);

  const Dataset ds = load_idx((dir / "img.idx").string(), (dir / "lbl.idx").string());
  CHECK(ds.size() == 2);
  CHECK(ds.images.shape() == Shape{2, 1, 3, 3});
  CHECK(ds.labels == std::vector<int>{4, 9});
  CHECK(ds.num_classes == 10);
  for (Index i = 0; i < 18; ++i)
    CHECK(ds.images[i] == doctest::Approx(double((i * 13) % 256) / 255.0).epsilon(1e-15));

  save_idx(ds, (dir / "img2.idx").string(), (dir / "lbl2.idx").string());
  CHECK(read_bytes(dir / "img2.idx") == images);
  CHECK(read_bytes(dir / "lbl2.idx") == labels);
}

TEST_CASE("idx error reporting") {
  const auto dir = temp_dir();
  auto [images, labels] = tiny_fixture();

  SUBCASE("bad image magic") {
    images[3] = 0x99;
    write_bytes(dir / "bad.idx", images);
    write_bytes(dir / "lbl.idx", labels);
    try {
      load_idx((dir / "bad.idx").string(), (dir / "lbl.idx").string());
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("0x00000803") != std::string::npos);
      CHECK(std::string(e.what()).find("0x00000899") != std::string::npos);
    }
  }
  SUBCASE("bad label magic") {
    labels[3] = 0x07;
    write_bytes(dir / "img.idx", images);
    write_bytes(dir / "badlbl.idx", labels);
    CHECK_THROWS_AS(load_idx((dir / "img.idx").string(), (dir / "badlbl.idx").string()),
                    FormatError);
  }
  SUBCASE("truncated pixels") {
    images.resize(images.size() - 5);
    write_bytes(dir / "short.idx", images);
    write_bytes(dir / "lbl.idx", labels);
    CHECK_THROWS_AS(load_idx((dir / "short.idx").string(), (dir / "lbl.idx").string()),
                    LengthError);
  }
  SUBCASE("count mismatch") {
    std::vector<unsigned char> one_label;
    push_u32_be(one_label, 0x00000801);
    push_u32_be(one_label, 1);
    one_label.push_back(4);
    write_bytes(dir / "img.idx", images);
    write_bytes(dir / "one.idx", one_label);
    CHECK_THROWS_AS(load_idx((dir / "img.idx").string(), (dir / "one.idx").string()),
                    ConsistencyError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx((dir / "nope.idx").string(), (dir / "nope2.idx").string()),
                    ConfigError);
  }
}

TEST_CASE("synthetic digits") {
  const Dataset a = synth_digits(10, 4, 14, 5);
  const Dataset b = synth_digits(10, 4, 14, 5);
  CHECK(a.size() == 40);
  CHECK(a.num_classes == 4);
  for (Index i = 0; i < a.images.size(); ++i) CHECK(a.images[i] == b.images[i]);
  CHECK(a.labels == b.labels);

  std::map<int, int> counts;
  for (int l : a.labels) ++counts[l];
  for (int c = 0; c < 4; ++c) CHECK(counts[c] == 10);

  for (Index i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i] >= 0.0);
    CHECK(a.images[i] <= 1.0);
  }

  const Dataset other = synth_digits(10, 4, 14, 6);
  bool differs = false;
  for (Index i = 0; i < a.images.size() && !differs; ++i)
    differs = a.images[i] != other.images[i];
  CHECK(differs);

  CHECK_THROWS_AS(synth_digits(10, 4, 11, 5), ConfigError);
  CHECK_THROWS_AS(synth_digits(0, 4, 14, 5), ConfigError);
  CHECK_THROWS_AS(synth_digits(10, 11, 14, 5), ConfigError);
}

TEST_CASE("synthetic digits saved as idx round-trip") {
  const auto dir = temp_dir();
  const Dataset ds = synth_digits(5, 3, 12, 77);
  save_idx(ds, (dir / "s1.idx").string(), (dir / "sl1.idx").string());
  const Dataset loaded = load_idx((dir / "s1.idx").string(), (dir / "sl1.idx").string());
  save_idx(loaded, (dir / "s2.idx").string(), (dir / "sl2.idx").string());
  CHECK(read_bytes(dir / "s1.idx") == read_bytes(dir / "s2.idx"));
  CHECK(read_bytes(dir / "sl1.idx") == read_bytes(dir / "sl2.idx"));
}

TEST_CASE("stratified split") {
  const Dataset ds = synth_digits(10, 10, 12, 21);  // 100 items
  const auto [train, test] = split(ds, 0.8, 3);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);

  std::map<int, int> train_counts, test_counts;
  for (int l : train.labels) ++train_counts[l];
  for (int l : test.labels) ++test_counts[l];
  for (int c = 0; c < 10; ++c) {
    CHECK(train_counts[c] == 8);
    CHECK(test_counts[c] == 2);
  }

  // union of the two sides is the original multiset of rows
  std::multiset<double> all_pixels, split_pixels;
  for (Index i = 0; i < ds.images.size(); ++i) all_pixels.insert(ds.images[i]);
  for (Index i = 0; i < train.images.size(); ++i) split_pixels.insert(train.images[i]);
  for (Index i = 0; i < test.images.size(); ++i) split_pixels.insert(test.images[i]);
  CHECK(all_pixels == split_pixels);

  CHECK_THROWS_AS(split(ds, 0.0, 3), ConfigError);
  CHECK_THROWS_AS(split(ds, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(split(ds, 0.999, 3), ConfigError);  // empty test side
}

TEST_CASE("batches") {
  const Dataset ds = synth_digits(10, 3, 12, 31);  // 30 items
  const auto batched = batches(ds, 8, 7);
  // 8+8+8+6: trailing batch keeps >= 2 samples
  REQUIRE(batched.size() == 4);
  CHECK(batched[0].images.dim(0) == 8);
  CHECK(batched[3].images.dim(0) == 6);

  const auto again = batches(ds, 8, 7);
  for (std::size_t b = 0; b < batched.size(); ++b) {
    CHECK(batched[b].labels == again[b].labels);
    for (Index i = 0; i < batched[b].images.size(); ++i)
      CHECK(batched[b].images[i] == again[b].images[i]);
  }

  int total = 0;
  for (const Batch& b : batched) total += static_cast<int>(b.labels.size());
  CHECK(total == 30);

  // a trailing singleton is dropped
  const Dataset odd = synth_digits(3, 3, 12, 31);  // 9 items
  const auto odd_batches = batches(odd, 4, 7);
  REQUIRE(odd_batches.size() == 2);
  CHECK(odd_batches[0].images.dim(0) == 4);
  CHECK(odd_batches[1].images.dim(0) == 4);
}

TEST_CASE("linear probe separates the default synthetic task") {
  const Dataset ds = synth_digits(500, 10, 20, 2024);
  const double accuracy = linear_probe_accuracy(ds);
  INFO("probe accuracy ", accuracy);
  CHECK(accuracy >= 0.95);
}
