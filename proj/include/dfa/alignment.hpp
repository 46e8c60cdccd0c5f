#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dfa/feedback.hpp"
#include "dfa/network.hpp"

namespace dfa {

/// Alignment between teaching and learning signals at one layer, one probe.
struct AlignmentRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::size_t layer = 0;
  double mean_cos = 0;
  double std_cos = 0;
  double std_deg = 0;       // spread of the per-sample angles, degrees
  std::size_t n = 0;        // samples that entered the statistics
  std::size_t excluded = 0; // samples dropped for a near-zero norm

  /// arccos(mean_cos) in degrees.
  double degrees() const;
};

struct CosineBatch {
  std::vector<double> cosines;
  std::size_t excluded = 0;
};

/// Norms below this exclude a sample from the cosine statistics.
inline constexpr double kDegenerateNorm = 1e-12;

/// Loss gradient with respect to each layer's block output (index i-1 for
/// layer i, batch x l_i), from a BP pass over the cached forward. Parameters
/// are not touched.
template <typename T>
std::vector<Tensor<T>> shadow_bp_signals(Network<T>& net, const Tensor<T>& error);

/// Row-wise cosine of two signals with the same rows and row size (a conv
/// feature map is compared flattened, channel-major). Rows where either
/// norm is below kDegenerateNorm are counted in `excluded` and skipped.
template <typename T>
CosineBatch per_sample_cosine(const Tensor<T>& teaching, const Tensor<T>& learning);

struct CosineStats {
  double mean = 0;
  double std = 0;  // population standard deviation
};

/// Throws ParameterError on an empty input.
CosineStats batch_stats(std::span<const double> values);

/// Full probe on one batch: a probe-mode forward (dropout drawn from
/// `dropout_rng`, batchnorm running statistics left alone), the error, the
/// DFA teaching signals B_i e, the shadow BP signals, and one record per layer
/// with at least one non-degenerate sample. `feedback` may be null only for
/// single-layer networks.
template <typename T>
std::vector<AlignmentRecord> measure_alignment(Network<T>& net, const UnifiedFeedback<T>* feedback,
                                               const Tensor<T>& inputs, const Tensor<T>& targets,
                                               Prng dropout_rng, std::size_t step = 0,
                                               std::size_t epoch = 0);

}  // namespace dfa
