#include "repsu/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "repsu/errors.hpp"
#include "repsu/rng.hpp"

namespace rpsu {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

// Per-pixel noise level of the synthetic digit task. High enough that small
// activations carry mostly noise, which is the regime shrinkage units target.
constexpr double kPixelNoiseSigma = 0.30;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& buf, std::size_t offset,
                          const std::string& path) {
  if (offset + 4 > buf.size()) throw LengthError(path + ": truncated header");
  return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
         (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

// 8x8 pixel-font templates, classes 0-9.
constexpr std::array<std::array<const char*, 8>, 10> kGlyphs = {{
    {"..###...", ".#...#..", "#.....#.", "#.....#.", "#.....#.", "#.....#.", ".#...#..",
     "..###..."},
    {"...#....", "..##....", ".#.#....", "...#....", "...#....", "...#....", "...#....",
     ".#####.."},
    {"..###...", ".#...#..", ".....#..", "....#...", "...#....", "..#.....", ".#......",
     ".#####.."},
    {"..###...", ".#...#..", ".....#..", "..###...", ".....#..", ".....#..", ".#...#..",
     "..###..."},
    {"....##..", "...#.#..", "..#..#..", ".#...#..", "#....#..", "######..", ".....#..",
     ".....#.."},
    {".#####..", ".#......", ".#......", ".####...", ".....#..", ".....#..", ".#...#..",
     "..###..."},
    {"..###...", ".#......", "#.......", "#.###...", "##...#..", "#.....#.", ".#...#..",
     "..###..."},
    {".######.", ".....#..", "....#...", "....#...", "...#....", "...#....", "..#.....",
     "..#....."},
    {"..###...", ".#...#..", ".#...#..", "..###...", ".#...#..", ".#...#..", ".#...#..",
     "..###..."},
    {"..###...", ".#...#..", "#.....#.", ".#....#.", "..#####.", ".....#..", "....#...",
     ".###...."},
}};

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto ibuf = read_file(images_path);
  const std::uint32_t imagic = read_u32_be(ibuf, 0, images_path);
  if (imagic != kImageMagic)
    throw FormatError(images_path + ": bad magic " + hex32(imagic) + ", expected " +
                      hex32(kImageMagic));
  const std::uint32_t count = read_u32_be(ibuf, 4, images_path);
  const std::uint32_t rows = read_u32_be(ibuf, 8, images_path);
  const std::uint32_t cols = read_u32_be(ibuf, 12, images_path);
  const std::size_t pixel_bytes = std::size_t(count) * rows * cols;
  if (ibuf.size() < 16 + pixel_bytes)
    throw LengthError(images_path + ": expected " + std::to_string(16 + pixel_bytes) +
                      " bytes, got " + std::to_string(ibuf.size()));

  const auto lbuf = read_file(labels_path);
  const std::uint32_t lmagic = read_u32_be(lbuf, 0, labels_path);
  if (lmagic != kLabelMagic)
    throw FormatError(labels_path + ": bad magic " + hex32(lmagic) + ", expected " +
                      hex32(kLabelMagic));
  const std::uint32_t lcount = read_u32_be(lbuf, 4, labels_path);
  if (lbuf.size() < 8 + lcount)
    throw LengthError(labels_path + ": expected " + std::to_string(8 + lcount) + " bytes, got " +
                      std::to_string(lbuf.size()));
  if (lcount != count)
    throw ConsistencyError("image count " + std::to_string(count) + " != label count " +
                           std::to_string(lcount));
  if (count == 0 || rows == 0 || cols == 0)
    throw FormatError(images_path + ": empty image set");

  Dataset ds;
  ds.images = Tensor({Index(count), 1, Index(rows), Index(cols)});
  for (std::size_t i = 0; i < pixel_bytes; ++i)
    ds.images[static_cast<Index>(i)] = static_cast<double>(ibuf[16 + i]) / 255.0;
  ds.labels.resize(count);
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    ds.labels[i] = static_cast<int>(lbuf[8 + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  if (ds.images.rank() != 4 || ds.images.dim(1) != 1)
    throw ShapeError("save_idx expects [N,1,H,W] images, got " +
                     shape_to_string(ds.images.shape()));
  const Index count = ds.images.dim(0), rows = ds.images.dim(2), cols = ds.images.dim(3);
  if (static_cast<Index>(ds.labels.size()) != count)
    throw ConsistencyError("save_idx: image/label counts differ");

  std::ofstream iout(images_path, std::ios::binary);
  if (!iout) throw ConfigError("cannot write " + images_path);
  write_u32_be(iout, kImageMagic);
  write_u32_be(iout, static_cast<std::uint32_t>(count));
  write_u32_be(iout, static_cast<std::uint32_t>(rows));
  write_u32_be(iout, static_cast<std::uint32_t>(cols));
  for (Index i = 0; i < ds.images.size(); ++i) {
    const auto byte = static_cast<unsigned char>(std::llround(ds.images[i] * 255.0));
    iout.write(reinterpret_cast<const char*>(&byte), 1);
  }

  std::ofstream lout(labels_path, std::ios::binary);
  if (!lout) throw ConfigError("cannot write " + labels_path);
  write_u32_be(lout, kLabelMagic);
  write_u32_be(lout, static_cast<std::uint32_t>(count));
  for (int label : ds.labels) {
    const auto byte = static_cast<unsigned char>(label);
    lout.write(reinterpret_cast<const char*>(&byte), 1);
  }
}

Dataset synth_digits(int n_per_class, int num_classes, int size, std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("synth_digits: n_per_class must be positive");
  if (num_classes < 2 || num_classes > 10)
    throw ConfigError("synth_digits: num_classes must lie in [2,10]");
  if (size < 12) throw ConfigError("synth_digits: size must be >= 12");

  const Index n_total = Index(n_per_class) * num_classes;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.images = Tensor({n_total, 1, size, size});
  ds.labels.resize(static_cast<std::size_t>(n_total));

  Rng rng(seed);
  const int box = size - 4;  // margin of 2 keeps +-2 px shifts inside the frame
  Index sample = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto& glyph = kGlyphs[static_cast<std::size_t>(c)];
    for (int i = 0; i < n_per_class; ++i, ++sample) {
      ds.labels[static_cast<std::size_t>(sample)] = c;
      const double intensity = rng.uniform(0.7, 1.0);
      const int dy = rng.uniform_int(-2, 2);
      const int dx = rng.uniform_int(-2, 2);
      double* img = ds.images.data() + sample * size * size;
      for (int gy = 0; gy < box; ++gy) {
        const int ty = gy * 8 / box;
        for (int gx = 0; gx < box; ++gx) {
          const int tx = gx * 8 / box;
          if (glyph[static_cast<std::size_t>(ty)][tx] == '#')
            img[(gy + 2 + dy) * size + (gx + 2 + dx)] = intensity;
        }
      }
      for (int p = 0; p < size * size; ++p)
        img[p] = std::clamp(img[p] + kPixelNoiseSigma * rng.normal(), 0.0, 1.0);
    }
  }
  return ds;
}

Dataset subset(const Dataset& ds, const std::vector<Index>& indices) {
  const Index rows = ds.images.dim(2), cols = ds.images.dim(3);
  const Index pixels = rows * cols;
  Dataset out;
  out.num_classes = ds.num_classes;
  out.images = Tensor({static_cast<Index>(indices.size()), 1, rows, cols});
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Index src = indices[i];
    std::copy_n(ds.images.data() + src * pixels, pixels,
                out.images.data() + static_cast<Index>(i) * pixels);
    out.labels[i] = ds.labels[static_cast<std::size_t>(src)];
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw ConfigError("split: train_fraction must lie strictly between 0 and 1");

  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (Index i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);

  Rng rng(seed);
  std::vector<Index> train_idx, test_idx;
  for (auto& group : by_class) {
    rng.shuffle(group);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(group.size())));
    for (std::size_t i = 0; i < group.size(); ++i)
      (i < n_train ? train_idx : test_idx).push_back(group[i]);
  }
  if (train_idx.empty() || test_idx.empty())
    throw ConfigError("split: fraction " + std::to_string(train_fraction) +
                      " produces an empty side");
  return {subset(ds, train_idx), subset(ds, test_idx)};
}

std::vector<Batch> batches(const Dataset& ds, int batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batches: batch_size must be positive");
  std::vector<Index> order(static_cast<std::size_t>(ds.size()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    if (end - start < 2) break;  // batch statistics need at least two samples
    std::vector<Index> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    Dataset part = subset(ds, chunk);
    out.push_back({std::move(part.images), std::move(part.labels)});
  }
  return out;
}

}  // namespace rpsu
