#include "dfa/filter_viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dfa/error.hpp"
#include "dfa/ops.hpp"

namespace dfa {

namespace {

template <typename T>
double norm(const Tensor<T>& x) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(x[i]) * x[i];
  return std::sqrt(s);
}

template <typename T>
void normalize(Tensor<T>& x) {
  const double n = norm(x);
  if (n == 0) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<T>(x[i] / n);
}

// Objective value and gradient with respect to the input batch of one.
template <typename T>
double objective(Network<T>& net, std::size_t last_block, std::size_t filter, const Tensor<T>& x,
                 Tensor<T>* grad) {
  Tensor<T> h = x;
  for (std::size_t j = 0; j <= last_block; ++j)
    h = net.block(j).forward(h, ForwardOptions::eval_cached(), nullptr);
  const Shape& out = net.block(last_block).output_shape();
  const std::size_t pixels = out[1] * out[2];
  double value = 0;
  for (std::size_t p = 0; p < pixels; ++p) value += h[filter * pixels + p];
  value /= static_cast<double>(pixels);
  if (grad) {
    Tensor<T> g(h.shape());
    for (std::size_t p = 0; p < pixels; ++p) g[filter * pixels + p] = T(1) / static_cast<T>(pixels);
    for (std::size_t j = last_block + 1; j-- > 0;) {
      net.block(j).param_backward(g, false);
      g = net.block(j).input_backward();
    }
    *grad = std::move(g);
  }
  return value;
}

void write_bytes(const std::filesystem::path& path, std::size_t channels, std::size_t w,
                 std::size_t h, const std::vector<unsigned char>& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << (channels == 3 ? "P6" : "P5") << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

// Interleaved 8-bit pixels (1 or 3 per position) of a C x H x W tensor.
template <typename T>
std::vector<unsigned char> to_bytes(const Tensor<T>& chw, std::size_t& channels) {
  if (chw.rank() != 3) throw ShapeError("image: expected C x H x W");
  const std::size_t c = chw.dim(0), plane = chw.dim(1) * chw.dim(2);
  channels = c == 3 ? 3 : 1;
  const std::size_t count = channels * plane;
  const auto [lo, hi] = std::minmax_element(chw.data().begin(), chw.data().begin() + count);
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  std::vector<unsigned char> out(count);
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t k = 0; k < channels; ++k) {
      const double v = range > 0 ? (chw[k * plane + p] - *lo) / range : 0.5;
      out[p * channels + k] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  return out;
}

}  // namespace

template <typename T>
FilterVizResult<T> maximize_filter(Network<T>& net, std::size_t layer, std::size_t filter,
                                   const FilterVizOptions& options) {
  if (layer == 0 || layer > net.layer_count())
    throw ParameterError("filter-viz: layer " + std::to_string(layer) + " does not exist");
  const Block<T>& target = net.layer(layer);
  if (target.config().kind != BlockKind::conv)
    throw ParameterError("filter-viz: layer " + std::to_string(layer) + " is not a conv layer");
  if (filter >= target.config().units)
    throw ParameterError("filter-viz: filter " + std::to_string(filter) + " out of range");
  const std::size_t last_block = net.block_of_layer(layer);

  Shape shape{1};
  shape.insert(shape.end(), net.input_shape().begin(), net.input_shape().end());
  Prng rng(options.seed);
  Tensor<T> x = gaussian_fill<T>(rng, shape, 0.0, 1.0);
  normalize(x);

  FilterVizResult<T> result;
  Tensor<T> grad;
  result.objective.push_back(objective(net, last_block, filter, x, &grad));
  for (std::size_t step = 0; step < options.steps; ++step) {
    if (norm(grad) > 0) {
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = static_cast<T>(x[i] + options.learning_rate * grad[i]);
      normalize(x);
    }
    result.objective.push_back(objective(net, last_block, filter, x, &grad));
  }
  net.clear_caches();
  result.image = x.reshaped(net.input_shape());
  return result;
}

template <typename T>
void write_pnm(const std::filesystem::path& path, const Tensor<T>& chw) {
  std::size_t channels = 1;
  const auto bytes = to_bytes(chw, channels);
  write_bytes(path, channels, chw.dim(2), chw.dim(1), bytes);
}

template <typename T>
void write_grid(const std::filesystem::path& path, const std::vector<Tensor<T>>& images,
                std::size_t columns) {
  if (images.empty() || columns == 0) throw ParameterError("grid: nothing to draw");
  const std::size_t h = images[0].dim(1), w = images[0].dim(2);
  const std::size_t cols = std::min(columns, images.size());
  const std::size_t rows = (images.size() + cols - 1) / cols;
  std::size_t channels = 1;
  std::vector<std::vector<unsigned char>> tiles;
  for (const auto& img : images) {
    if (img.shape() != images[0].shape()) throw ShapeError("grid: images differ in shape");
    tiles.push_back(to_bytes(img, channels));
  }
  const std::size_t gw = cols * (w + 1) + 1, gh = rows * (h + 1) + 1;
  std::vector<unsigned char> canvas(gw * gh * channels, 0);
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const std::size_t oy = (t / cols) * (h + 1) + 1, ox = (t % cols) * (w + 1) + 1;
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(tiles[t].begin() + static_cast<std::ptrdiff_t>(y * w * channels), w * channels,
                  canvas.begin() + static_cast<std::ptrdiff_t>(((oy + y) * gw + ox) * channels));
  }
  write_bytes(path, channels, gw, gh, canvas);
}

template FilterVizResult<float> maximize_filter(Network<float>&, std::size_t, std::size_t,
                                                const FilterVizOptions&);
template FilterVizResult<double> maximize_filter(Network<double>&, std::size_t, std::size_t,
                                                 const FilterVizOptions&);
template void write_pnm(const std::filesystem::path&, const Tensor<float>&);
template void write_pnm(const std::filesystem::path&, const Tensor<double>&);
template void write_grid(const std::filesystem::path&, const std::vector<Tensor<float>>&, std::size_t);
template void write_grid(const std::filesystem::path&, const std::vector<Tensor<double>>&, std::size_t);

}  // namespace dfa
