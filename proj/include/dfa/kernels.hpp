#pragma once

// Compute kernels behind the tensor operations. Every kernel exists twice:
// an OpenMP path used by the library and a plain serial loop in
// `kernels::reference` kept for tests and benchmarks. Both accumulate each
// output element in the same order, so their results agree bitwise for any
// thread count.

#include <cstddef>

namespace dfa::kernels {

enum class Op { none, transpose };

/// Spatial layout of one convolution: input C x H x W, square-or-not kernel.
struct ConvGeometry {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (height + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (width + 2 * pad - kernel_w) / stride + 1; }
  std::size_t patch_size() const { return channels * kernel_h * kernel_w; }
  std::size_t out_pixels() const { return out_h() * out_w(); }
  std::size_t image_size() const { return channels * height * width; }

  /// Throws ShapeError unless the output extent is a positive integer.
  void validate() const;

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// C (m x n) = op(A) op(B), or C += op(A) op(B) when `accumulate`.
/// op(A) is m x k, op(B) is k x n; all matrices row-major with leading
/// dimensions lda/ldb/ldc. For every (i, j) the products are added to the
/// running value in ascending p order.
template <typename T>
void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
          bool accumulate = false);

/// images: `batch` contiguous C x H x W images.
/// cols: patch_size() rows by batch * out_pixels() columns; sample s owns
/// columns [s * out_pixels(), (s + 1) * out_pixels()). Row index is
/// (c * kernel_h + ki) * kernel_w + kj, so rows run channel-major then
/// row-major within the patch. Padding reads as zero.
template <typename T>
void im2col(const T* images, std::size_t batch, const ConvGeometry& g, T* cols);

/// Adjoint of im2col: overwrites `images` with the sum of every column entry
/// that was read from each pixel.
template <typename T>
void col2im(const T* cols, std::size_t batch, const ConvGeometry& g, T* images);

namespace reference {

template <typename T>
void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
          bool accumulate = false);

template <typename T>
void im2col(const T* images, std::size_t batch, const ConvGeometry& g, T* cols);

template <typename T>
void col2im(const T* cols, std::size_t batch, const ConvGeometry& g, T* images);

}  // namespace reference

}  // namespace dfa::kernels
