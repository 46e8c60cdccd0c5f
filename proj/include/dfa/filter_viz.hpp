#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dfa/network.hpp"

namespace dfa {

struct FilterVizOptions {
  std::size_t steps = 200;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
};

template <typename T>
struct FilterVizResult {
  Tensor<T> image;                 // C x H x W, unit norm
  std::vector<double> objective;   // before the first step, then after each step
};

/// Activation maximization for one conv filter: starting from a random unit
/// vector, repeat x <- x + lr * grad, x <- x / |x| where the objective is the
/// mean eval-mode output of `filter` over all positions of conv `layer`
/// (after its activation). A zero gradient leaves x in place. No regularizer.
template <typename T>
FilterVizResult<T> maximize_filter(Network<T>& net, std::size_t layer, std::size_t filter,
                                   const FilterVizOptions& options);

/// Binary PGM (one channel) or PPM (three channels) scaled min..max to
/// 0..255. Other channel counts write channel 0 as PGM.
template <typename T>
void write_pnm(const std::filesystem::path& path, const Tensor<T>& chw);

/// Images tiled row-major into one picture, `columns` per row, with a
/// one-pixel black border. Each tile is scaled on its own.
template <typename T>
void write_grid(const std::filesystem::path& path, const std::vector<Tensor<T>>& images,
                std::size_t columns);

}  // namespace dfa
