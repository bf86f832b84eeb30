#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "repsu/tensor.hpp"

namespace rpsu {

// Labeled image set; pixels are scaled to [0, 1] (standardization is the
// batchnorm layer's job, so the loader keeps raw intensities).
struct Dataset {
  Tensor images;  // [N, 1, H, W]
  std::vector<int> labels;
  int num_classes = 0;

  Index size() const noexcept { return images.rank() == 4 ? images.dim(0) : 0; }
};

// IDX container layout (big-endian):
//   images  u32 magic 0x00000803, u32 count, u32 rows, u32 cols, count*rows*cols bytes
//   labels  u32 magic 0x00000801, u32 count, count bytes
// Errors: FormatError on a wrong magic, LengthError on truncation,
// ConsistencyError when the two counts differ.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Exact inverse of load_idx: re-serializing a loaded set reproduces the
// input files byte for byte.
void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// Deterministic glyph renderer: one template per class, random +-2 px shift,
// per-sample intensity jitter and per-pixel noise. size >= 12.
Dataset synth_digits(int n_per_class, int num_classes, int size, std::uint64_t seed);

// Label-stratified split; per-class proportions are preserved within one item.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

// Deterministically shuffled mini-batches. A trailing single-sample batch is
// dropped because train-mode batch statistics need at least two samples.
std::vector<Batch> batches(const Dataset& ds, int batch_size, std::uint64_t seed);

// Rows of `ds` at the given positions, in order.
Dataset subset(const Dataset& ds, const std::vector<Index>& indices);

}  // namespace rpsu
