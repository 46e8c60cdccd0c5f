#pragma once

#include "dfa/kernels.hpp"
#include "dfa/prng.hpp"
#include "dfa/tensor.hpp"

namespace dfa {

/// Matrix product of an m x k and a k x n tensor. Throws ShapeError on
/// non-matrix input or mismatched inner extents, NumericError on overflow to Inf/NaN.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// i.i.d. normal samples mean + std * N(0, 1), drawn in row-major order.
template <typename T>
Tensor<T> gaussian_fill(Prng& rng, const Shape& shape, double mean, double std);

/// One C x H x W image to its (C*kh*kw) x (H_out*W_out) patch matrix.
template <typename T>
Tensor<T> im2col(const Tensor<T>& image, const kernels::ConvGeometry& geometry);

/// Adjoint of im2col for a single image.
template <typename T>
Tensor<T> col2im(const Tensor<T>& cols, const kernels::ConvGeometry& geometry);

/// Geometry for an image tensor shaped C x H x W.
kernels::ConvGeometry conv_geometry(const Shape& image_shape, std::size_t kernel_h,
                                    std::size_t kernel_w, std::size_t stride, std::size_t pad);

}  // namespace dfa
