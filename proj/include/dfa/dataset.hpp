#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dfa/prng.hpp"
#include "dfa/tensor.hpp"

namespace dfa {

/// Images n x C x H x W scaled to [0, 1] (then optionally standardized) with
/// integer class labels. Immutable once loaded.
struct LabeledDataset {
  Tensor<float> images;
  std::vector<std::uint16_t> labels;
  std::size_t classes = 0;
  std::string split;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }

  /// First `n` samples (all of them when n == 0 or n >= size()).
  LabeledDataset head(std::size_t n) const;
};

/// MNIST IDX pair: images start with big-endian magic 0x00000803 followed by
/// count, rows, cols; labels with 0x00000801 and count. Pixels become p / 255.
LabeledDataset load_mnist_idx(const std::filesystem::path& images,
                              const std::filesystem::path& labels);

/// CIFAR binary batches. CIFAR-10 records are 1 label byte + 3072 pixel
/// bytes (R, G, B planes of 32 x 32); CIFAR-100 records are coarse label,
/// fine label, then the same pixels, and the fine label is kept.
LabeledDataset load_cifar_binary(std::span<const std::filesystem::path> files, int classes);

/// Per-channel mean and standard deviation, fitted on a training split.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

Standardization fit_standardization(const LabeledDataset& data);
void apply_standardization(LabeledDataset& data, const Standardization& s);

/// Rows `indices` of the dataset as a batch tensor.
template <typename T>
Tensor<T> gather_images(const LabeledDataset& data, std::span<const std::size_t> indices);

/// One-hot targets for rows `indices`.
template <typename T>
Tensor<T> gather_one_hot(const LabeledDataset& data, std::span<const std::size_t> indices);

/// Training-time augmentation. `pad` zero pixels are added on each side and a
/// crop of crop_h x crop_w is taken at a random offset (crop 0 means the
/// original size); `flip` mirrors each sample horizontally with probability
/// 1/2. Per sample, the crop offsets (y then x) are drawn before the flip.
struct AugmentSpec {
  bool crop = false;
  std::size_t pad = 0;
  std::size_t crop_h = 0;
  std::size_t crop_w = 0;
  bool flip = false;

  bool active() const { return crop || flip; }
};

template <typename T>
Tensor<T> augment(const Tensor<T>& batch, Prng& rng, const AugmentSpec& spec);

/// FNV-1a of a whole file, for run manifests.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace dfa
