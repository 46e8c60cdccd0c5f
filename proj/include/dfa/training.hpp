#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfa/feedback.hpp"
#include "dfa/network.hpp"

namespace dfa {

enum class Algorithm { bp, dfa };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

/// Positive batch-mean gradients for every layer; sgd_step subtracts them.
template <typename T>
struct GradientSet {
  Algorithm algorithm = Algorithm::bp;
  std::vector<BlockGradients<T>> layers;  // layers[i - 1] belongs to layer i

  BlockGradients<T>& layer(std::size_t i) { return layers.at(i - 1); }
  const BlockGradients<T>& layer(std::size_t i) const { return layers.at(i - 1); }
};

template <typename T>
struct LossAndError {
  double loss = 0;    // mean softmax cross-entropy
  Tensor<T> error;    // e = softmax(logits) - targets, one row per sample
};

/// Softmax cross-entropy. Since d(loss_b)/d(logits_b) = e_b, the error rows
/// are the per-sample logit gradients shared by BP and DFA.
template <typename T>
LossAndError<T> loss_and_error(const Tensor<T>& logits, const Tensor<T>& targets);

/// Exact chain rule from the logits back through every block.
template <typename T>
GradientSet<T> bp_backward(Network<T>& net, const Tensor<T>& error);

/// Direct feedback alignment: layer N receives e, hidden layer i receives
/// B_i e at its output. No layer consults another layer's parameters.
/// `feedback` may be null only for single-layer networks.
template <typename T>
GradientSet<T> dfa_backward(Network<T>& net, const Tensor<T>& error,
                            const UnifiedFeedback<T>* feedback);

/// dfa_backward with the layers processed concurrently; bitwise equal to the
/// sequential result for any thread count.
template <typename T>
GradientSet<T> dfa_backward_parallel(Network<T>& net, const Tensor<T>& error,
                                     const UnifiedFeedback<T>* feedback);

/// Neurons of one layer whose gradients stay zero for the whole run.
struct MaskSpec {
  std::size_t layer = 0;             // 1-based
  std::vector<std::size_t> neurons;  // sorted, distinct
  double fraction = 0;

  /// round(fraction * width) neurons drawn without replacement from `seed`.
  static MaskSpec random(std::size_t layer, std::size_t width, double fraction,
                         std::uint64_t seed);
  /// Exactly `masked` neurons drawn from `seed`.
  static MaskSpec with_count(std::size_t layer, std::size_t width, std::size_t masked,
                             std::uint64_t seed);
};

/// Zeroes the weight rows, bias and batchnorm entries of the masked neurons.
template <typename T>
void apply_gradient_mask(GradientSet<T>& grads, const MaskSpec& mask);

/// W <- W - lr * dW for every parameter.
template <typename T>
void sgd_step(Network<T>& net, const GradientSet<T>& grads, double learning_rate);

/// Reduce-on-plateau: an epoch improves when loss < best * (1 - threshold).
/// After more than `patience` epochs without improvement the rate is divided
/// by `factor`, followed by `patience` epochs of cooldown.
class PlateauSchedule {
 public:
  static constexpr double kThreshold = 1e-3;

  PlateauSchedule(double initial_lr, std::size_t patience = 5, double factor = 10.0);

  /// Feeds one epoch's validation loss; returns the rate for the next epoch.
  double step(double loss);
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_;
  double best_;
  std::size_t bad_epochs_ = 0;
  std::size_t cooldown_ = 0;
};

/// Replays `history` through a PlateauSchedule started at `initial_lr`.
double plateau_lr(std::span<const double> history, double initial_lr, std::size_t patience = 5,
                  double factor = 10.0);

}  // namespace dfa
