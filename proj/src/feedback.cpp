#include "dfa/feedback.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "dfa/error.hpp"
#include "dfa/kernels.hpp"
#include "dfa/ops.hpp"

namespace dfa {

namespace {
std::atomic<std::size_t> g_feedback_elements{0};
}

template <typename T>
std::size_t FeedbackView<T>::cols() const {
  return source->error_size();
}

template <typename T>
const T* FeedbackView<T>::data() const {
  return source->matrix().ptr();
}

template <typename T>
Tensor<T> FeedbackView<T>::materialize() const {
  Tensor<T> out({rows, cols()});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * data()[i];
  return out;
}

template <typename T>
UnifiedFeedback<T>::UnifiedFeedback(Tensor<T> matrix, bool normalized)
    : matrix_(std::move(matrix)), normalized_(normalized) {
  g_feedback_elements += matrix_.size();
}

template <typename T>
UnifiedFeedback<T> UnifiedFeedback<T>::build(Prng& rng, std::size_t max_rows,
                                             std::size_t error_size, bool normalized) {
  if (max_rows == 0 || error_size == 0)
    throw ParameterError("feedback: dimensions must be positive");
  const double std =
      normalized ? 1.0 / std::sqrt(static_cast<double>(max_rows) * static_cast<double>(error_size))
                 : 1.0;
  return UnifiedFeedback(gaussian_fill<T>(rng, {max_rows, error_size}, 0.0, std), normalized);
}

template <typename T>
std::uint64_t UnifiedFeedback<T>::fingerprint() const {
  return fnv1a(matrix_.ptr(), matrix_.size() * sizeof(T));
}

template <typename T>
FeedbackView<T> UnifiedFeedback<T>::view(std::size_t rows) const {
  if (rows == 0 || rows > max_rows())
    throw ParameterError("feedback: layer size " + std::to_string(rows) + " outside [1, " +
                         std::to_string(max_rows()) + "]");
  const T scale =
      normalized_ ? static_cast<T>(std::sqrt(static_cast<double>(max_rows()) /
                                             static_cast<double>(rows)))
                  : T(1);
  return {this, rows, scale};
}

template <typename T>
std::size_t UnifiedFeedback<T>::allocated_elements() {
  return g_feedback_elements.load();
}

template <typename T>
Tensor<T> project_error(const FeedbackView<T>& view, const Tensor<T>& error) {
  if (!view.source) throw ParameterError("project_error: empty feedback view");
  const std::size_t e_len = view.cols();
  if (error.rank() != 2 || error.dim(1) != e_len)
    throw ShapeError("project_error: error " + to_string(error.shape()) +
                     " does not have e_len = " + std::to_string(e_len) + " columns");
  const std::size_t batch = error.dim(0);
  Tensor<T> out({batch, view.rows});
  kernels::gemm(kernels::Op::none, kernels::Op::transpose, batch, view.rows, e_len, error.ptr(),
                e_len, view.data(), e_len, out.ptr(), view.rows);
  if (view.scale != T(1))
    for (auto& v : out.data()) v = view.scale * v;
  return out;
}

MemoryReport memory_report(std::span<const std::size_t> layer_sizes, std::size_t error_size,
                           std::size_t bytes_per_element) {
  MemoryReport r;
  r.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  r.error_size = error_size;
  r.bytes_per_element = bytes_per_element;
  std::uint64_t largest = 0;
  for (std::size_t l : layer_sizes) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(l) * error_size * bytes_per_element;
    r.layer_bytes.push_back(bytes);
    r.naive_bytes += bytes;
    largest = std::max(largest, bytes);
  }
  r.unified_bytes = largest;
  return r;
}

template struct FeedbackView<float>;
template struct FeedbackView<double>;
template class UnifiedFeedback<float>;
template class UnifiedFeedback<double>;
template Tensor<float> project_error(const FeedbackView<float>&, const Tensor<float>&);
template Tensor<double> project_error(const FeedbackView<double>&, const Tensor<double>&);

}  // namespace dfa
