#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfa/activation.hpp"
#include "dfa/batchnorm.hpp"
#include "dfa/kernels.hpp"
#include "dfa/prng.hpp"
#include "dfa/tensor.hpp"

namespace dfa {

enum class BlockKind { fc, conv, maxpool, dropout };

std::string to_string(BlockKind kind);

/// One network block. fc and conv blocks carry parameters and run
///   affine -> batchnorm (optional) -> activation -> dropout (optional).
/// maxpool (2x2, stride 2) and dropout blocks are parameter-free; a leading
/// dropout block implements input dropout.
struct BlockConfig {
  BlockKind kind = BlockKind::fc;
  std::size_t units = 0;  // fc: output features, conv: output channels
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 0;
  Activation activation{ActivationKind::identity, 0.0};
  double dropout_rate = 0.0;
  bool batchnorm = false;

  bool has_parameters() const { return kind == BlockKind::fc || kind == BlockKind::conv; }

  /// Output extents for a given per-sample input shape; throws on mismatch.
  Shape output_shape(const Shape& input) const;

  /// Single architecture line, e.g. "fc 800 act=tanh dropout=0.1 bn=on".
  std::string describe() const;

  friend bool operator==(const BlockConfig&, const BlockConfig&) = default;
};

/// What a forward call does beyond computing outputs.
struct ForwardOptions {
  bool train = true;                 // dropout active, batch statistics
  bool store_caches = true;          // keep what backward needs
  bool update_running_stats = true;  // batchnorm running averages

  static ForwardOptions training() { return {true, true, true}; }
  static ForwardOptions evaluation() { return {false, false, false}; }
  /// Training-mode signals without touching running statistics (alignment probes).
  static ForwardOptions probe() { return {true, true, false}; }
  /// Eval-mode arithmetic with caches kept (input-gradient ascent).
  static ForwardOptions eval_cached() { return {false, true, false}; }
};

template <typename T>
struct BlockGradients {
  Tensor<T> weights;  // dW, same shape as W; empty for parameter-free blocks
  Tensor<T> bias;
  Tensor<T> gamma;    // batchnorm scale/shift, empty without batchnorm
  Tensor<T> beta;
};

template <typename T>
class Block {
 public:
  /// `layer` is the 1-based index among parameterized blocks (0 otherwise).
  /// Weights are He-initialized from `init_rng`, biases start at zero.
  Block(BlockConfig config, Shape input_shape, int layer, Prng* init_rng);

  /// `input` is batch x input_shape(). `rng` is required when dropout is active.
  Tensor<T> forward(const Tensor<T>& input, const ForwardOptions& options, Prng* rng);

  /// Chains `grad_output` (the loss gradient at this block's output, one row
  /// per sample) through dropout, activation, batchnorm and the affine map.
  /// Parameter gradients are batch means. The signal at the affine output is
  /// retained so input_backward() can follow.
  BlockGradients<T> param_backward(const Tensor<T>& grad_output, bool need_params = true);

  /// Gradient at this block's input from the last param_backward().
  Tensor<T> input_backward();

  /// param_backward followed, if requested, by input_backward.
  BlockGradients<T> backward(const Tensor<T>& grad_output, bool need_input,
                             Tensor<T>* grad_input);

  const BlockConfig& config() const { return config_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }
  std::size_t output_size() const { return shape_size(output_shape_); }
  int layer() const { return layer_; }

  Tensor<T>& weights() { return weights_; }
  const Tensor<T>& weights() const { return weights_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& bias() const { return bias_; }
  BatchNorm<T>* batchnorm() { return bn_ ? &*bn_ : nullptr; }
  const BatchNorm<T>* batchnorm() const { return bn_ ? &*bn_ : nullptr; }

  bool has_cache() const { return cached_; }
  void clear_cache();

  /// Input of the activation from the last cached forward (after batchnorm).
  const Tensor<T>& cached_activation_input() const { return act_in_; }
  const Tensor<T>& cached_dropout_mask() const { return mask_; }
  const std::vector<std::uint32_t>& cached_pool_argmax() const { return argmax_; }

  /// True when the last eval-mode forward had to use batch statistics because
  /// batchnorm had no running statistics yet.
  bool batch_stats_fallback() const { return bn_ && bn_->used_batch_fallback(); }

 private:
  Tensor<T> affine_forward(const Tensor<T>& input, bool store);
  void apply_dropout(Tensor<T>& h, bool store, Prng* rng);
  Tensor<T> pool_forward(const Tensor<T>& input, bool store);
  Tensor<T> pool_backward(const Tensor<T>& grad) const;

  BlockConfig config_;
  Shape input_shape_;
  Shape output_shape_;
  int layer_ = 0;
  kernels::ConvGeometry geometry_{};

  Tensor<T> weights_;
  Tensor<T> bias_;
  std::optional<BatchNorm<T>> bn_;

  bool cached_ = false;
  std::size_t batch_ = 0;
  Tensor<T> input_;     // fc input (batch x fan_in)
  Tensor<T> cols_;      // conv patches (patch x batch*pixels)
  Tensor<T> act_in_;    // activation input
  Tensor<T> mask_;      // dropout mask, empty when dropout was inactive
  std::vector<std::uint32_t> argmax_;
  Tensor<T> grad_affine_;  // fc: batch x out, conv: channels x batch*pixels
  bool have_grad_affine_ = false;
};

}  // namespace dfa
