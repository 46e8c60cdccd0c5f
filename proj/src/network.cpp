#include "dfa/network.hpp"

#include "dfa/error.hpp"

namespace dfa {

template <typename T>
Network<T>::Network(Shape input_shape, std::vector<BlockConfig> configs, std::uint64_t init_seed)
    : input_shape_(std::move(input_shape)), configs_(std::move(configs)) {
  if (configs_.empty()) throw ParameterError("network: no blocks");
  if (input_shape_.empty() || shape_size(input_shape_) == 0)
    throw ShapeError("network: empty input shape");
  const BlockConfig& last = configs_.back();
  if (last.kind != BlockKind::fc || last.activation.kind != ActivationKind::identity)
    throw ParameterError("network: the final block must be fc with identity activation (logits)");

  const Prng init(init_seed);
  Shape shape = input_shape_;
  int layer = 0;
  blocks_.reserve(configs_.size());
  for (const auto& cfg : configs_) {
    Prng rng = init.fork(static_cast<std::uint64_t>(layer + 1));
    if (cfg.has_parameters()) {
      ++layer;
      layer_blocks_.push_back(blocks_.size());
    }
    blocks_.emplace_back(cfg, shape, cfg.has_parameters() ? layer : 0, &rng);
    shape = blocks_.back().output_shape();
  }
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, const ForwardOptions& options, Prng* rng) {
  Tensor<T> h = blocks_.front().forward(input, options, rng);
  for (std::size_t i = 1; i < blocks_.size(); ++i) h = blocks_[i].forward(h, options, rng);
  return h;
}

template <typename T>
std::vector<std::size_t> Network<T>::hidden_sizes() const {
  std::vector<std::size_t> sizes;
  for (std::size_t i = 1; i < layer_count(); ++i) sizes.push_back(layer(i).output_size());
  return sizes;
}

template <typename T>
std::uint64_t Network<T>::parameter_fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const Tensor<T>& t) {
    if (!t.empty()) h = fnv1a(t.ptr(), t.size() * sizeof(T), h);
  };
  for (std::size_t i = 1; i <= layer_count(); ++i) {
    const auto& b = layer(i);
    mix(b.weights());
    mix(b.bias());
    if (const auto* bn = b.batchnorm()) {
      mix(bn->gamma());
      mix(bn->beta());
      mix(bn->running_mean());
      mix(bn->running_var());
    }
  }
  return h;
}

template <typename T>
void Network<T>::clear_caches() {
  for (auto& b : blocks_) b.clear_cache();
}

template <typename T>
bool Network<T>::batch_stats_fallback() const {
  for (const auto& b : blocks_)
    if (b.batch_stats_fallback()) return true;
  return false;
}

template class Network<float>;
template class Network<double>;

}  // namespace dfa
