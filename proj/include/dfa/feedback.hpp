#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dfa/prng.hpp"
#include "dfa/tensor.hpp"

namespace dfa {

template <typename T>
class UnifiedFeedback;

/// Layer i's feedback matrix as a zero-copy window onto the unified matrix:
/// the first `rows` rows of B times `scale`.
template <typename T>
struct FeedbackView {
  const UnifiedFeedback<T>* source = nullptr;
  std::size_t rows = 0;
  T scale = T(1);

  std::size_t cols() const;
  const T* data() const;  // rows x cols, row-major, unscaled
  /// Explicit scale * B[0:rows, :] copy, for inspection and tests.
  Tensor<T> materialize() const;
};

/// The single random feedback matrix B (l_max x e_len) shared by all layers.
///
/// Normalized: B = U / sqrt(l_max * e_len) with U ~ N(0, 1), and layer views
/// carry scale sqrt(l_max / l_i), so every layer sees entries of variance
/// 1 / (l_i * e_len). Unnormalized: B = U and every view has scale 1.
/// Immutable after construction and safe to share across threads.
template <typename T>
class UnifiedFeedback {
 public:
  static UnifiedFeedback build(Prng& rng, std::size_t max_rows, std::size_t error_size,
                               bool normalized = true);

  UnifiedFeedback(UnifiedFeedback&&) noexcept = default;
  UnifiedFeedback& operator=(UnifiedFeedback&&) noexcept = default;
  UnifiedFeedback(const UnifiedFeedback&) = delete;
  UnifiedFeedback& operator=(const UnifiedFeedback&) = delete;

  std::size_t max_rows() const { return matrix_.dim(0); }
  std::size_t error_size() const { return matrix_.dim(1); }
  bool normalized() const { return normalized_; }
  const Tensor<T>& matrix() const { return matrix_; }
  std::uint64_t fingerprint() const;

  /// Throws ParameterError unless 1 <= rows <= max_rows().
  FeedbackView<T> view(std::size_t rows) const;

  /// Feedback elements allocated by all UnifiedFeedback instances in this process.
  static std::size_t allocated_elements();

 private:
  UnifiedFeedback(Tensor<T> matrix, bool normalized);

  Tensor<T> matrix_;
  bool normalized_ = true;
};

/// Teaching signal for every sample: row b of the result is view * e_b
/// (batch x view.rows). Conv layers reinterpret each row channel-major.
template <typename T>
Tensor<T> project_error(const FeedbackView<T>& view, const Tensor<T>& error);

struct MemoryReport {
  std::vector<std::size_t> layer_sizes;
  std::vector<std::uint64_t> layer_bytes;  // naive per-layer feedback cost
  std::size_t error_size = 0;
  std::size_t bytes_per_element = 0;
  std::uint64_t naive_bytes = 0;    // sum_i l_i * e
  std::uint64_t unified_bytes = 0;  // max_i l_i * e
};

/// Feedback storage for layers 1..N-1 given their output sizes.
MemoryReport memory_report(std::span<const std::size_t> layer_sizes, std::size_t error_size,
                           std::size_t bytes_per_element);

}  // namespace dfa
