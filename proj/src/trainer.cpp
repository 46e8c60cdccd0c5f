#include "dfa/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "dfa/error.hpp"

namespace dfa {

namespace {

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const std::uint16_t> labels) {
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (static_cast<std::size_t>(best) == labels[r]) ++correct;
  }
  return correct;
}

std::vector<std::uint16_t> labels_of(const LabeledDataset& data, std::span<const std::size_t> idx) {
  std::vector<std::uint16_t> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = data.labels[idx[i]];
  return out;
}

}  // namespace

template <typename T>
Evaluation evaluate(Network<T>& net, const LabeledDataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ParameterError("evaluate: empty dataset");
  Evaluation ev;
  std::vector<std::size_t> idx;
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<T> x = gather_images<T>(data, idx);
    const Tensor<T> y = gather_one_hot<T>(data, idx);
    const Tensor<T> logits = net.forward(x, ForwardOptions::evaluation(), nullptr);
    loss_sum += loss_and_error(logits, y).loss * static_cast<double>(idx.size());
    correct += count_correct(logits, labels_of(data, idx));
  }
  ev.samples = data.size();
  ev.loss = loss_sum / static_cast<double>(data.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return ev;
}

template <typename T>
Trainer<T>::Trainer(Shape input_shape, std::vector<BlockConfig> blocks, TrainConfig config)
    : config_(std::move(config)),
      root_(config_.seed),
      net_(std::move(input_shape), std::move(blocks), root_.fork(1).seed()),
      shuffle_rng_(root_.fork(3)),
      dropout_rng_(root_.fork(4)),
      augment_rng_(root_.fork(5)),
      schedule_(config_.learning_rate, config_.patience, config_.factor),
      lr_(config_.learning_rate) {
  if (!(config_.learning_rate >= 0)) throw ParameterError("train: learning rate must be >= 0");
  if (config_.batch_size == 0) throw ParameterError("train: batch size must be >= 1");
  const auto hidden = net_.hidden_sizes();
  if (!hidden.empty()) {
    Prng fb_rng = root_.fork(2);
    feedback_ = UnifiedFeedback<T>::build(fb_rng, *std::max_element(hidden.begin(), hidden.end()),
                                          net_.output_size(), config_.feedback_normalization);
  }
  if (config_.mask) {
    const auto& m = *config_.mask;
    if (m.layer == 0 || m.layer > net_.layer_count())
      throw ParameterError("mask: layer " + std::to_string(m.layer) + " does not exist");
    const std::size_t width = net_.layer(m.layer).config().units;
    if (m.masked > width)
      throw ParameterError("mask: cannot mask " + std::to_string(m.masked) + " of " +
                           std::to_string(width) + " neurons");
    mask_ = MaskSpec::with_count(m.layer, width, m.masked, root_.fork(7).seed());
  }
}

template <typename T>
std::vector<AlignmentRecord> Trainer<T>::probe(const Tensor<T>& inputs,
                                               const Tensor<T>& targets) {
  auto records = measure_alignment(net_, feedback(), inputs, targets, root_.fork(6).fork(step_),
                                   step_, epoch_);
  net_.clear_caches();
  return records;
}

template <typename T>
EpochMetrics Trainer<T>::train_epoch(const LabeledDataset& train, const LabeledDataset& held_out) {
  if (train.size() == 0) throw ParameterError("train: empty dataset");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[shuffle_rng_.below(i + 1)]);

  EpochMetrics m;
  m.learning_rate = lr_;
  double loss_sum = 0;
  std::size_t correct = 0, seen = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    // A lone trailing sample is dropped; batch statistics need two.
    if (config_.batch_size > 1 && end - start < 2 && start > 0) break;
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    Tensor<T> x = gather_images<T>(train, idx);
    if (config_.augment.active()) x = augment(x, augment_rng_, config_.augment);
    const Tensor<T> y = gather_one_hot<T>(train, idx);

    const Tensor<T> logits = net_.forward(x, ForwardOptions::training(), &dropout_rng_);
    const auto le = loss_and_error(logits, y);
    loss_sum += le.loss * static_cast<double>(idx.size());
    correct += count_correct(logits, labels_of(train, idx));
    seen += idx.size();

    GradientSet<T> grads;
    if (config_.algorithm == Algorithm::bp)
      grads = bp_backward(net_, le.error);
    else if (config_.parallel_backward)
      grads = dfa_backward_parallel(net_, le.error, feedback());
    else
      grads = dfa_backward(net_, le.error, feedback());
    if (mask_) apply_gradient_mask(grads, *mask_);
    sgd_step(net_, grads, lr_);
    ++step_;
  }
  net_.clear_caches();
  ++epoch_;

  m.epoch = epoch_;
  m.step = step_;
  m.train_samples = seen;
  m.train_loss = loss_sum / static_cast<double>(seen);
  m.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
  if (held_out.size() > 0) {
    const auto ev = evaluate(net_, held_out);
    m.test_loss = ev.loss;
    m.test_accuracy = ev.accuracy;
    m.test_samples = ev.samples;
    if (config_.probe_every > 0 && epoch_ % config_.probe_every == 0) {
      std::vector<std::size_t> idx(std::min(config_.probe_batch, held_out.size()));
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      m.alignment = probe(gather_images<T>(held_out, idx), gather_one_hot<T>(held_out, idx));
    }
    if (config_.plateau) lr_ = schedule_.step(ev.loss);
  }
  return m;
}

template Evaluation evaluate(Network<float>&, const LabeledDataset&, std::size_t);
template Evaluation evaluate(Network<double>&, const LabeledDataset&, std::size_t);
template class Trainer<float>;
template class Trainer<double>;

}  // namespace dfa
