#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dfa/ops.hpp"
#include "dfa/training.hpp"

namespace dfa::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dfa_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline BlockConfig fc(std::size_t units, Activation act = {ActivationKind::tanh, 0},
                      double dropout = 0, bool bn = false) {
  BlockConfig c;
  c.kind = BlockKind::fc;
  c.units = units;
  c.activation = act;
  c.dropout_rate = dropout;
  c.batchnorm = bn;
  return c;
}

inline BlockConfig output(std::size_t units) { return fc(units, {ActivationKind::identity, 0}); }

inline BlockConfig conv(std::size_t channels, Activation act = {ActivationKind::tanh, 0},
                        std::size_t kernel = 3, std::size_t pad = 1, bool bn = false) {
  BlockConfig c;
  c.kind = BlockKind::conv;
  c.units = channels;
  c.kernel = kernel;
  c.pad = pad;
  c.activation = act;
  c.batchnorm = bn;
  return c;
}

inline BlockConfig maxpool() {
  BlockConfig c;
  c.kind = BlockKind::maxpool;
  return c;
}

inline BlockConfig dropout(double p) {
  BlockConfig c;
  c.kind = BlockKind::dropout;
  c.dropout_rate = p;
  return c;
}

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, double std = 1.0) {
  Prng rng(seed);
  return gaussian_fill<T>(rng, shape, 0.0, std);
}

template <typename T>
Tensor<T> random_one_hot(std::size_t batch, std::size_t classes, std::uint64_t seed) {
  Prng rng(seed);
  Tensor<T> y({batch, classes});
  for (std::size_t b = 0; b < batch; ++b) y.at(b, rng.below(classes)) = T(1);
  return y;
}

/// Batch of inputs with a leading batch dimension.
inline Shape batch_shape(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a kink or changed a pooling winner
  std::string worst;
};

/// Compares bp_backward against a five-point central difference of the mean
/// cross-entropy for a sample of every parameter tensor. Dropout masks are
/// frozen by replaying the same dropout seed on every forward; batchnorm runs
/// on batch statistics without touching running averages.
///   rel = |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
inline GradCheckResult check_bp_gradients(Network<double>& net, const Tensor<double>& x,
                                          const Tensor<double>& y, std::size_t per_tensor = 10,
                                          double h = 1e-3, std::uint64_t seed = 99) {
  const std::uint64_t dropout_seed = 4242;
  auto signature = [&]() {
    // Signs of every activation input at a kink-bearing activation plus the
    // pooling winners; a change means the loss is not smooth on the stencil.
    std::vector<int> sig;
    for (std::size_t j = 0; j < net.block_count(); ++j) {
      const auto& b = net.block(j);
      if (b.config().kind == BlockKind::maxpool) {
        for (auto a : b.cached_pool_argmax()) sig.push_back(static_cast<int>(a));
      } else if (b.config().has_parameters() &&
                 b.config().activation.kind != ActivationKind::tanh &&
                 b.config().activation.kind != ActivationKind::identity) {
        for (double a : b.cached_activation_input().data()) sig.push_back(a > 0 ? 1 : (a < 0 ? -1 : 0));
      }
    }
    return sig;
  };
  auto loss = [&](std::vector<int>* sig) {
    Prng rng(dropout_seed);
    const auto logits = net.forward(x, ForwardOptions::probe(), &rng);
    if (sig) *sig = signature();
    return loss_and_error(logits, y).loss;
  };

  Prng rng(dropout_seed);
  const auto logits = net.forward(x, ForwardOptions::probe(), &rng);
  const auto base_sig = signature();
  const auto grads = bp_backward(net, loss_and_error(logits, y).error);

  GradCheckResult res;
  Prng pick(seed);
  for (std::size_t i = 1; i <= net.layer_count(); ++i) {
    Block<double>& blk = net.layer(i);
    const BlockGradients<double>& g = grads.layer(i);
    std::vector<std::pair<Tensor<double>*, const Tensor<double>*>> tensors = {
        {&blk.weights(), &g.weights}, {&blk.bias(), &g.bias}};
    if (auto* bn = blk.batchnorm()) {
      tensors.emplace_back(&bn->gamma(), &g.gamma);
      tensors.emplace_back(&bn->beta(), &g.beta);
    }
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      Tensor<double>& p = *tensors[t].first;
      const Tensor<double>& gp = *tensors[t].second;
      const std::size_t count = std::min(per_tensor, p.size());
      for (std::size_t s = 0; s < count; ++s) {
        const std::size_t k = count == p.size() ? s : pick.below(p.size());
        const double orig = p[k];
        double f[4];
        const double offs[4] = {2 * h, h, -h, -2 * h};
        bool smooth = true;
        for (int o = 0; o < 4; ++o) {
          p[k] = orig + offs[o];
          std::vector<int> sig;
          f[o] = loss(&sig);
          smooth = smooth && sig == base_sig;
        }
        p[k] = orig;
        if (!smooth) {
          ++res.skipped;
          continue;
        }
        const double numeric = (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * h);
        const double analytic = gp[k];
        const double rel = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        ++res.checked;
        if (rel > res.max_rel_error) {
          res.max_rel_error = rel;
          res.worst = "layer " + std::to_string(i) + " tensor " + std::to_string(t) + " index " +
                      std::to_string(k) + " analytic " + std::to_string(analytic) + " numeric " +
                      std::to_string(numeric);
        }
      }
    }
  }
  net.clear_caches();
  return res;
}

}  // namespace dfa::test
