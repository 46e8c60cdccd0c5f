#include "dfa/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "dfa/error.hpp"

namespace dfa {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t big_endian_u32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

LabeledDataset LabeledDataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  LabeledDataset out;
  Shape shape = images.shape();
  shape[0] = n;
  const std::size_t stride = images.row_size();
  out.images = Tensor<float>(shape, std::vector<float>(images.data().begin(),
                                                       images.data().begin() + n * stride));
  out.labels.assign(labels.begin(), labels.begin() + n);
  out.classes = classes;
  out.split = split;
  return out;
}

LabeledDataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (img.size() < 16 || big_endian_u32(img, 0) != 0x00000803)
    throw FormatError(images_path.string() + ": not an IDX image file (magic 0x00000803)");
  if (lab.size() < 8 || big_endian_u32(lab, 0) != 0x00000801)
    throw FormatError(labels_path.string() + ": not an IDX label file (magic 0x00000801)");
  const std::size_t count = big_endian_u32(img, 4);
  const std::size_t rows = big_endian_u32(img, 8);
  const std::size_t cols = big_endian_u32(img, 12);
  const std::size_t label_count = big_endian_u32(lab, 4);
  if (count == 0 || rows == 0 || cols == 0) throw FormatError("IDX: empty image file");
  if (img.size() != 16 + count * rows * cols)
    throw FormatError(images_path.string() + ": truncated or oversized image data");
  if (lab.size() != 8 + label_count) throw FormatError(labels_path.string() + ": truncated label data");
  if (label_count != count)
    throw FormatError("IDX: " + std::to_string(count) + " images but " +
                      std::to_string(label_count) + " labels");

  LabeledDataset data;
  data.images = Tensor<float>({count, 1, rows, cols});
  for (std::size_t i = 0; i < count * rows * cols; ++i)
    data.images[i] = static_cast<float>(img[16 + i]) / 255.0f;
  data.classes = 10;
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (lab[8 + i] >= data.classes) throw FormatError("IDX: label out of range");
    data.labels[i] = lab[8 + i];
  }
  return data;
}

LabeledDataset load_cifar_binary(std::span<const std::filesystem::path> files, int classes) {
  if (classes != 10 && classes != 100) throw ParameterError("cifar: classes must be 10 or 100");
  const std::size_t label_bytes = classes == 10 ? 1 : 2;
  constexpr std::size_t kPixels = 3 * 32 * 32;
  const std::size_t record = label_bytes + kPixels;
  std::vector<std::vector<unsigned char>> contents;
  std::size_t total = 0;
  for (const auto& f : files) {
    contents.push_back(read_file(f));
    if (contents.back().empty() || contents.back().size() % record != 0)
      throw FormatError(f.string() + ": length is not a multiple of the " +
                        std::to_string(record) + "-byte record");
    total += contents.back().size() / record;
  }
  if (total == 0) throw FormatError("cifar: no records");
  LabeledDataset data;
  data.images = Tensor<float>({total, 3, 32, 32});
  data.labels.resize(total);
  data.classes = static_cast<std::size_t>(classes);
  std::size_t n = 0;
  for (const auto& bytes : contents) {
    for (std::size_t r = 0; r < bytes.size() / record; ++r, ++n) {
      const unsigned char* rec = bytes.data() + r * record;
      const unsigned label = rec[label_bytes - 1];
      if (label >= data.classes) throw FormatError("cifar: label out of range");
      data.labels[n] = static_cast<std::uint16_t>(label);
      for (std::size_t p = 0; p < kPixels; ++p)
        data.images[n * kPixels + p] = static_cast<float>(rec[label_bytes + p]) / 255.0f;
    }
  }
  return data;
}

Standardization fit_standardization(const LabeledDataset& data) {
  const std::size_t n = data.size();
  const std::size_t channels = data.images.dim(1);
  const std::size_t plane = data.images.row_size() / channels;
  Standardization s{std::vector<double>(channels), std::vector<double>(channels)};
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = data.images.ptr() + (i * channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) sum += p[k];
    }
    const double mean = sum / static_cast<double>(n * plane);
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = data.images.ptr() + (i * channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) sq += (p[k] - mean) * (p[k] - mean);
    }
    s.mean[c] = mean;
    s.stddev[c] = std::sqrt(sq / static_cast<double>(n * plane));
    if (s.stddev[c] == 0.0) s.stddev[c] = 1.0;
  }
  return s;
}

void apply_standardization(LabeledDataset& data, const Standardization& s) {
  const std::size_t channels = data.images.dim(1);
  if (s.mean.size() != channels) throw ShapeError("standardization: channel count differs");
  const std::size_t plane = data.images.row_size() / channels;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t c = 0; c < channels; ++c) {
      float* p = data.images.ptr() + (i * channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k)
        p[k] = static_cast<float>((p[k] - s.mean[c]) / s.stddev[c]);
    }
}

template <typename T>
Tensor<T> gather_images(const LabeledDataset& data, std::span<const std::size_t> indices) {
  Shape shape = data.images.shape();
  shape[0] = indices.size();
  Tensor<T> out(shape);
  const std::size_t stride = data.images.row_size();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const float* src = data.images.ptr() + indices[r] * stride;
    std::copy(src, src + stride, out.ptr() + r * stride);
  }
  return out;
}

template <typename T>
Tensor<T> gather_one_hot(const LabeledDataset& data, std::span<const std::size_t> indices) {
  Tensor<T> out({indices.size(), data.classes});
  for (std::size_t r = 0; r < indices.size(); ++r) out.at(r, data.labels[indices[r]]) = T(1);
  return out;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& batch, Prng& rng, const AugmentSpec& spec) {
  if (batch.rank() != 4) throw ShapeError("augment: batch must be N x C x H x W");
  const std::size_t n = batch.dim(0), ch = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const std::size_t oh = spec.crop && spec.crop_h ? spec.crop_h : h;
  const std::size_t ow = spec.crop && spec.crop_w ? spec.crop_w : w;
  const std::size_t pad = spec.crop ? spec.pad : 0;
  if (oh > h + 2 * pad || ow > w + 2 * pad)
    throw ParameterError("augment: crop larger than the padded image");
  Tensor<T> out({n, ch, oh, ow});
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t oy = 0, ox = 0;  // offsets into the padded image
    if (spec.crop) {
      oy = rng.below(h + 2 * pad - oh + 1);
      ox = rng.below(w + 2 * pad - ow + 1);
    }
    const bool flip = spec.flip && rng.uniform() <= 0.5;
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          const std::size_t sx = flip ? ow - 1 - x : x;
          const long py = static_cast<long>(oy + y) - static_cast<long>(pad);
          const long px = static_cast<long>(ox + sx) - static_cast<long>(pad);
          T v = T(0);
          if (py >= 0 && px >= 0 && py < static_cast<long>(h) && px < static_cast<long>(w))
            v = batch[((s * ch + c) * h + static_cast<std::size_t>(py)) * w + static_cast<std::size_t>(px)];
          out[((s * ch + c) * oh + y) * ow + x] = v;
        }
  }
  return out;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return fnv1a(bytes.data(), bytes.size());
}

template Tensor<float> gather_images(const LabeledDataset&, std::span<const std::size_t>);
template Tensor<double> gather_images(const LabeledDataset&, std::span<const std::size_t>);
template Tensor<float> gather_one_hot(const LabeledDataset&, std::span<const std::size_t>);
template Tensor<double> gather_one_hot(const LabeledDataset&, std::span<const std::size_t>);
template Tensor<float> augment(const Tensor<float>&, Prng&, const AugmentSpec&);
template Tensor<double> augment(const Tensor<double>&, Prng&, const AugmentSpec&);

}  // namespace dfa
