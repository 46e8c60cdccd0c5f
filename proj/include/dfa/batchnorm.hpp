#pragma once

#include <cstddef>

#include "dfa/tensor.hpp"

namespace dfa {

enum class BnStats { batch, running };

/// Per-feature batch normalization. Inputs are viewed as batch x features x
/// spatial: spatial = 1 for dense layers and H*W for conv feature maps, where
/// the statistics pool over batch and spatial positions.
template <typename T>
class BatchNorm {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t features);

  /// `stats` selects batch or running statistics. Running statistics requested
  /// before any training update fall back to batch statistics and raise
  /// used_batch_fallback(). Batch statistics need at least two samples.
  Tensor<T> forward(const Tensor<T>& x, std::size_t spatial, BnStats stats, bool update_running,
                    bool store_cache);

  struct Gradients {
    Tensor<T> dgamma;  // averaged over the batch
    Tensor<T> dbeta;
    Tensor<T> dx;      // empty unless requested
  };

  /// Backward through the last cached forward. `grad` has the forward output's shape.
  Gradients backward(const Tensor<T>& grad, bool need_params, bool need_input) const;

  std::size_t features() const { return gamma_.size(); }
  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  const Tensor<T>& gamma() const { return gamma_; }
  const Tensor<T>& beta() const { return beta_; }
  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }
  bool has_running_stats() const { return has_running_; }
  void set_has_running_stats(bool v) { has_running_ = v; }
  bool used_batch_fallback() const { return fallback_; }
  bool has_cache() const { return !xhat_.empty(); }
  void clear_cache();

 private:
  Tensor<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  bool has_running_ = false;
  bool fallback_ = false;

  // Cache of the last forward.
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  std::size_t spatial_ = 1;
  BnStats cached_stats_ = BnStats::batch;
};

}  // namespace dfa
