#pragma once

#include <cstdint>
#include <vector>

#include "dfa/block.hpp"

namespace dfa {

/// Ordered stack of blocks. Parameterized blocks are the network's layers,
/// numbered 1..N; layer N is the output layer and must be the final block, a
/// dense block with identity activation producing the logits.
template <typename T>
class Network {
 public:
  Network(Shape input_shape, std::vector<BlockConfig> configs, std::uint64_t init_seed);

  Tensor<T> forward(const Tensor<T>& input, const ForwardOptions& options, Prng* rng);

  std::size_t block_count() const { return blocks_.size(); }
  Block<T>& block(std::size_t i) { return blocks_.at(i); }
  const Block<T>& block(std::size_t i) const { return blocks_.at(i); }

  std::size_t layer_count() const { return layer_blocks_.size(); }
  /// 1-based layer access.
  Block<T>& layer(std::size_t i) { return blocks_.at(layer_blocks_.at(i - 1)); }
  const Block<T>& layer(std::size_t i) const { return blocks_.at(layer_blocks_.at(i - 1)); }
  std::size_t block_of_layer(std::size_t i) const { return layer_blocks_.at(i - 1); }

  std::size_t output_size() const { return blocks_.back().output_size(); }
  const Shape& input_shape() const { return input_shape_; }
  const std::vector<BlockConfig>& configs() const { return configs_; }

  /// Output sizes l_1..l_{N-1} of the hidden layers (the ones fed by feedback).
  std::vector<std::size_t> hidden_sizes() const;

  /// FNV-1a over every parameter and running statistic, in layer order.
  std::uint64_t parameter_fingerprint() const;

  void clear_caches();
  bool batch_stats_fallback() const;

 private:
  Shape input_shape_;
  std::vector<BlockConfig> configs_;
  std::vector<Block<T>> blocks_;
  std::vector<std::size_t> layer_blocks_;
};

}  // namespace dfa
