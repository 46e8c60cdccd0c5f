#include "dfa/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dfa/error.hpp"
#include "dfa/training.hpp"

namespace dfa {

namespace {

double to_degrees(double cosine) {
  return std::acos(std::clamp(cosine, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

double AlignmentRecord::degrees() const { return to_degrees(mean_cos); }

template <typename T>
std::vector<Tensor<T>> shadow_bp_signals(Network<T>& net, const Tensor<T>& error) {
  if (error.rank() != 2 || error.dim(1) != net.output_size())
    throw ShapeError("shadow_bp_signals: error does not match the network output");
  std::vector<Tensor<T>> signals(net.layer_count());
  std::size_t first_layer_block = net.block_of_layer(1);
  Tensor<T> g = error;
  for (std::size_t j = net.block_count(); j-- > 0;) {
    Block<T>& block = net.block(j);
    if (block.layer() > 0) signals[static_cast<std::size_t>(block.layer()) - 1] = g;
    if (j == first_layer_block) break;
    block.param_backward(g, false);
    g = block.input_backward();
  }
  return signals;
}

template <typename T>
CosineBatch per_sample_cosine(const Tensor<T>& teaching, const Tensor<T>& learning) {
  if (teaching.rows() == 0 || teaching.rows() != learning.rows() ||
      teaching.row_size() != learning.row_size())
    throw ShapeError("per_sample_cosine: signal shapes differ");
  CosineBatch out;
  const std::size_t width = teaching.row_size();
  for (std::size_t b = 0; b < teaching.rows(); ++b) {
    const T* t = teaching.ptr() + b * width;
    const T* c = learning.ptr() + b * width;
    double dot = 0, nt = 0, nc = 0;
    for (std::size_t k = 0; k < width; ++k) {
      dot += static_cast<double>(t[k]) * c[k];
      nt += static_cast<double>(t[k]) * t[k];
      nc += static_cast<double>(c[k]) * c[k];
    }
    nt = std::sqrt(nt);
    nc = std::sqrt(nc);
    if (nt < kDegenerateNorm || nc < kDegenerateNorm) {
      ++out.excluded;
      continue;
    }
    out.cosines.push_back(std::clamp(dot / (nt * nc), -1.0, 1.0));
  }
  return out;
}

CosineStats batch_stats(std::span<const double> values) {
  if (values.empty()) throw ParameterError("batch_stats: no values");
  double sum = 0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

template <typename T>
std::vector<AlignmentRecord> measure_alignment(Network<T>& net, const UnifiedFeedback<T>* feedback,
                                               const Tensor<T>& inputs, const Tensor<T>& targets,
                                               Prng dropout_rng, std::size_t step,
                                               std::size_t epoch) {
  const Tensor<T> logits = net.forward(inputs, ForwardOptions::probe(), &dropout_rng);
  const auto le = loss_and_error(logits, targets);
  const auto learning = shadow_bp_signals(net, le.error);

  std::vector<AlignmentRecord> records;
  for (std::size_t i = 1; i <= net.layer_count(); ++i) {
    Tensor<T> teaching;
    if (i == net.layer_count()) {
      teaching = le.error;
    } else {
      if (!feedback) throw ParameterError("measure_alignment: hidden layers need feedback");
      teaching = project_error(feedback->view(net.layer(i).output_size()), le.error);
    }
    const CosineBatch cb = per_sample_cosine(teaching, learning[i - 1]);
    if (cb.cosines.empty()) continue;
    const CosineStats stats = batch_stats(cb.cosines);
    std::vector<double> angles(cb.cosines.size());
    std::transform(cb.cosines.begin(), cb.cosines.end(), angles.begin(), to_degrees);
    AlignmentRecord r;
    r.step = step;
    r.epoch = epoch;
    r.layer = i;
    r.mean_cos = stats.mean;
    r.std_cos = stats.std;
    r.std_deg = batch_stats(angles).std;
    r.n = cb.cosines.size();
    r.excluded = cb.excluded;
    records.push_back(r);
  }
  return records;
}

#define DFA_INSTANTIATE_ALIGNMENT(T)                                                          \
  template std::vector<Tensor<T>> shadow_bp_signals(Network<T>&, const Tensor<T>&);           \
  template CosineBatch per_sample_cosine(const Tensor<T>&, const Tensor<T>&);                 \
  template std::vector<AlignmentRecord> measure_alignment(                                    \
      Network<T>&, const UnifiedFeedback<T>*, const Tensor<T>&, const Tensor<T>&, Prng,       \
      std::size_t, std::size_t);

DFA_INSTANTIATE_ALIGNMENT(float)
DFA_INSTANTIATE_ALIGNMENT(double)

}  // namespace dfa
