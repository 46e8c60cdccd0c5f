#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dfa/alignment.hpp"
#include "dfa/dataset.hpp"
#include "dfa/training.hpp"

namespace dfa {

/// Neurons of `layer` whose gradients are zeroed for the whole run.
struct MaskConfig {
  std::size_t layer = 0;
  std::size_t masked = 0;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  Algorithm algorithm = Algorithm::dfa;
  double learning_rate = 5e-4;
  std::size_t epochs = 15;
  std::size_t batch_size = 128;
  bool plateau = false;  // reduce-on-plateau on the held-out loss
  std::size_t patience = 5;
  double factor = 10.0;
  bool feedback_normalization = true;
  bool parallel_backward = false;
  std::optional<MaskConfig> mask;
  std::size_t probe_every = 1;  // epochs between alignment probes, 0 disables
  std::size_t probe_batch = 128;
  AugmentSpec augment;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // updates applied so far
  double learning_rate = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double test_loss = 0;
  double test_accuracy = 0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  std::vector<AlignmentRecord> alignment;
};

struct Evaluation {
  double loss = 0;
  double accuracy = 0;
  std::size_t samples = 0;
};

/// Eval-mode loss and accuracy over a whole dataset.
template <typename T>
Evaluation evaluate(Network<T>& net, const LabeledDataset& data, std::size_t batch_size = 500);

/// Owns a network, its feedback matrix and every random stream of one run.
///
/// All streams fork from Prng(seed): 1 initialization, 2 feedback, 3 shuffling,
/// 4 dropout, 5 augmentation, 6 alignment probes, 7 gradient mask. Streams do
/// not depend on the algorithm, so BP and DFA runs with one seed start from the
/// same parameters and see the same batches.
template <typename T>
class Trainer {
 public:
  Trainer(Shape input_shape, std::vector<BlockConfig> blocks, TrainConfig config);

  /// One pass over `train` in shuffled minibatches; a trailing batch of one
  /// sample is skipped. Probes use the first probe_batch samples of `held_out`,
  /// whose loss also drives the plateau schedule.
  EpochMetrics train_epoch(const LabeledDataset& train, const LabeledDataset& held_out);

  Network<T>& network() { return net_; }
  const Network<T>& network() const { return net_; }
  const UnifiedFeedback<T>* feedback() const { return feedback_ ? &*feedback_ : nullptr; }
  const std::optional<MaskSpec>& mask() const { return mask_; }
  const TrainConfig& config() const { return config_; }
  double learning_rate() const { return lr_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

  /// Alignment records on the given batch. Parameters, running statistics and
  /// random streams are left as they were; forward caches are cleared.
  std::vector<AlignmentRecord> probe(const Tensor<T>& inputs, const Tensor<T>& targets);

 private:
  TrainConfig config_;
  Prng root_;
  Network<T> net_;
  std::optional<UnifiedFeedback<T>> feedback_;
  std::optional<MaskSpec> mask_;
  Prng shuffle_rng_;
  Prng dropout_rng_;
  Prng augment_rng_;
  PlateauSchedule schedule_;
  double lr_;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
};

}  // namespace dfa
