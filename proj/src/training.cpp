#include "dfa/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "dfa/error.hpp"
#include "dfa/instrumentation.hpp"

namespace dfa {

std::string to_string(Algorithm a) { return a == Algorithm::bp ? "bp" : "dfa"; }

Algorithm parse_algorithm(std::string_view text) {
  if (text == "bp") return Algorithm::bp;
  if (text == "dfa") return Algorithm::dfa;
  throw ParameterError("unknown algorithm '" + std::string(text) + "' (expected bp or dfa)");
}

template <typename T>
LossAndError<T> loss_and_error(const Tensor<T>& logits, const Tensor<T>& targets) {
  if (logits.rank() != 2 || logits.shape() != targets.shape())
    throw ShapeError("loss: logits " + to_string(logits.shape()) + " and targets " +
                     to_string(targets.shape()) + " differ");
  if (!logits.all_finite()) throw NumericError("loss: non-finite logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  LossAndError<T> out{0.0, Tensor<T>(logits.shape())};
  double total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t hot = classes;
    for (std::size_t c = 0; c < classes; ++c) {
      const T t = targets.at(b, c);
      if (t == T(1) && hot == classes)
        hot = c;
      else if (t != T(0))
        throw ParameterError("loss: targets must be one-hot");
    }
    if (hot == classes) throw ParameterError("loss: targets must be one-hot");
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) max_logit = std::max<double>(max_logit, logits.at(b, c));
    double z = 0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(logits.at(b, c) - max_logit);
    const double log_z = std::log(z) + max_logit;
    total += log_z - logits.at(b, hot);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(logits.at(b, c) - log_z);
      out.error.at(b, c) = static_cast<T>(p - (c == hot ? 1.0 : 0.0));
    }
  }
  out.loss = total / static_cast<double>(batch);
  return out;
}

namespace {

template <typename T>
void check_error(const Network<T>& net, const Tensor<T>& error) {
  if (error.rank() != 2 || error.dim(1) != net.output_size())
    throw ShapeError("backward: error " + to_string(error.shape()) +
                     " does not match output size " + std::to_string(net.output_size()));
}

/// Previous parameterized layer before block j, 0 when none.
template <typename T>
int previous_layer(const Network<T>& net, std::size_t j) {
  for (std::size_t k = j; k-- > 0;)
    if (net.block(k).layer() > 0) return net.block(k).layer();
  return 0;
}

template <typename T>
Tensor<T> dfa_signal(const Network<T>& net, std::size_t layer, const Tensor<T>& error,
                     const UnifiedFeedback<T>* feedback) {
  if (layer == net.layer_count()) return error;
  if (!feedback) throw ParameterError("dfa_backward: hidden layers need a feedback matrix");
  if (feedback->error_size() != net.output_size())
    throw ShapeError("dfa_backward: feedback error size does not match the network output");
  return project_error(feedback->view(net.layer(layer).output_size()), error);
}

}  // namespace

template <typename T>
GradientSet<T> bp_backward(Network<T>& net, const Tensor<T>& error) {
  check_error(net, error);
  GradientSet<T> grads{Algorithm::bp, std::vector<BlockGradients<T>>(net.layer_count())};
  Tensor<T> g = error;
  for (std::size_t j = net.block_count(); j-- > 0;) {
    Block<T>& block = net.block(j);
    const int upstream = previous_layer(net, j);
    {
      instrumentation::ReaderScope scope(block.layer());
      auto bg = block.param_backward(g, block.layer() > 0);
      if (block.layer() > 0) grads.layer(static_cast<std::size_t>(block.layer())) = std::move(bg);
    }
    if (upstream == 0) break;
    // The signal produced here feeds the update of the upstream layer.
    instrumentation::ReaderScope scope(upstream);
    g = block.input_backward();
  }
  return grads;
}

template <typename T>
GradientSet<T> dfa_backward(Network<T>& net, const Tensor<T>& error,
                            const UnifiedFeedback<T>* feedback) {
  check_error(net, error);
  GradientSet<T> grads{Algorithm::dfa, std::vector<BlockGradients<T>>(net.layer_count())};
  for (std::size_t i = 1; i <= net.layer_count(); ++i) {
    instrumentation::ReaderScope scope(static_cast<int>(i));
    grads.layer(i) = net.layer(i).param_backward(dfa_signal(net, i, error, feedback));
  }
  return grads;
}

template <typename T>
GradientSet<T> dfa_backward_parallel(Network<T>& net, const Tensor<T>& error,
                                     const UnifiedFeedback<T>* feedback) {
  check_error(net, error);
  const std::size_t layers = net.layer_count();
  for (std::size_t i = 1; i < layers; ++i) {
    if (!feedback) throw ParameterError("dfa_backward: hidden layers need a feedback matrix");
    feedback->view(net.layer(i).output_size());
  }
  GradientSet<T> grads{Algorithm::dfa, std::vector<BlockGradients<T>>(layers)};
  std::vector<std::exception_ptr> failures(layers);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(layers); ++k) {
    const std::size_t i = static_cast<std::size_t>(k) + 1;
    try {
      instrumentation::ReaderScope scope(static_cast<int>(i));
      grads.layer(i) = net.layer(i).param_backward(dfa_signal(net, i, error, feedback));
    } catch (...) {
      failures[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return grads;
}

MaskSpec MaskSpec::with_count(std::size_t layer, std::size_t width, std::size_t masked,
                              std::uint64_t seed) {
  if (layer == 0) throw ParameterError("mask: layers are numbered from 1");
  if (masked > width) throw ParameterError("mask: more masked neurons than the layer width");
  std::vector<std::size_t> order(width);
  for (std::size_t i = 0; i < width; ++i) order[i] = i;
  Prng rng(seed);
  for (std::size_t i = width; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  order.resize(masked);
  std::sort(order.begin(), order.end());
  return {layer, std::move(order), width ? static_cast<double>(masked) / width : 0.0};
}

MaskSpec MaskSpec::random(std::size_t layer, std::size_t width, double fraction,
                          std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ParameterError("mask: fraction outside [0, 1]");
  auto spec = with_count(layer, width,
                         static_cast<std::size_t>(std::llround(fraction * static_cast<double>(width))),
                         seed);
  spec.fraction = fraction;
  return spec;
}

template <typename T>
void apply_gradient_mask(GradientSet<T>& grads, const MaskSpec& mask) {
  if (mask.layer == 0 || mask.layer > grads.layers.size())
    throw ParameterError("mask: layer " + std::to_string(mask.layer) + " does not exist");
  auto& g = grads.layer(mask.layer);
  const std::size_t width = g.bias.size();
  for (std::size_t n : mask.neurons) {
    if (n >= width) throw ParameterError("mask: neuron index out of range");
    auto row = g.weights.row(n);
    std::fill(row.begin(), row.end(), T(0));
    g.bias[n] = T(0);
    if (!g.gamma.empty()) g.gamma[n] = T(0);
    if (!g.beta.empty()) g.beta[n] = T(0);
  }
}

template <typename T>
void sgd_step(Network<T>& net, const GradientSet<T>& grads, double learning_rate) {
  if (grads.layers.size() != net.layer_count())
    throw ShapeError("sgd_step: gradient set does not match the network");
  if (learning_rate == 0.0) return;
  const T lr = static_cast<T>(learning_rate);
  auto update = [lr](Tensor<T>& param, const Tensor<T>& grad) {
    if (grad.empty()) return;
    if (param.shape() != grad.shape()) throw ShapeError("sgd_step: parameter shape mismatch");
    for (std::size_t i = 0; i < param.size(); ++i) param[i] = param[i] - lr * grad[i];
  };
  for (std::size_t i = 1; i <= net.layer_count(); ++i) {
    auto& block = net.layer(i);
    const auto& g = grads.layer(i);
    update(block.weights(), g.weights);
    update(block.bias(), g.bias);
    if (auto* bn = block.batchnorm()) {
      update(bn->gamma(), g.gamma);
      update(bn->beta(), g.beta);
    }
  }
}

PlateauSchedule::PlateauSchedule(double initial_lr, std::size_t patience, double factor)
    : lr_(initial_lr),
      patience_(patience),
      factor_(factor),
      best_(std::numeric_limits<double>::infinity()) {
  if (!(factor > 1.0)) throw ParameterError("plateau: factor must exceed 1");
}

double PlateauSchedule::step(double loss) {
  if (loss < best_ * (1.0 - kThreshold) || std::isinf(best_)) {
    best_ = loss;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (cooldown_ > 0) {
    --cooldown_;
    bad_epochs_ = 0;
  }
  if (bad_epochs_ > patience_) {
    lr_ /= factor_;
    cooldown_ = patience_;
    bad_epochs_ = 0;
  }
  return lr_;
}

double plateau_lr(std::span<const double> history, double initial_lr, std::size_t patience,
                  double factor) {
  PlateauSchedule schedule(initial_lr, patience, factor);
  for (double loss : history) schedule.step(loss);
  return schedule.learning_rate();
}

#define DFA_INSTANTIATE_TRAINING(T)                                                          \
  template LossAndError<T> loss_and_error(const Tensor<T>&, const Tensor<T>&);               \
  template GradientSet<T> bp_backward(Network<T>&, const Tensor<T>&);                        \
  template GradientSet<T> dfa_backward(Network<T>&, const Tensor<T>&,                        \
                                       const UnifiedFeedback<T>*);                           \
  template GradientSet<T> dfa_backward_parallel(Network<T>&, const Tensor<T>&,               \
                                                const UnifiedFeedback<T>*);                  \
  template void apply_gradient_mask(GradientSet<T>&, const MaskSpec&);                       \
  template void sgd_step(Network<T>&, const GradientSet<T>&, double);

DFA_INSTANTIATE_TRAINING(float)
DFA_INSTANTIATE_TRAINING(double)

}  // namespace dfa
