#include "dfa/ops.hpp"

namespace dfa {

namespace {

template <typename T>
void require_finite(const Tensor<T>& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite result");
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: operands must be matrices");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions differ: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  kernels::gemm(kernels::Op::none, kernels::Op::none, m, n, k, a.ptr(), k, b.ptr(), n, c.ptr(),
                n);
  require_finite(c, "matmul");
  return c;
}

template <typename T>
Tensor<T> gaussian_fill(Prng& rng, const Shape& shape, double mean, double std) {
  if (!(std >= 0.0)) throw ParameterError("gaussian_fill: std must be non-negative");
  Tensor<T> out(shape);
  for (auto& v : out.data()) v = static_cast<T>(mean + std * rng.normal());
  require_finite(out, "gaussian_fill");
  return out;
}

kernels::ConvGeometry conv_geometry(const Shape& image_shape, std::size_t kernel_h,
                                    std::size_t kernel_w, std::size_t stride, std::size_t pad) {
  if (image_shape.size() != 3) throw ShapeError("conv: image must be C x H x W");
  kernels::ConvGeometry g{image_shape[0], image_shape[1], image_shape[2], kernel_h, kernel_w,
                          stride, pad};
  g.validate();
  return g;
}

template <typename T>
Tensor<T> im2col(const Tensor<T>& image, const kernels::ConvGeometry& g) {
  g.validate();
  if (image.size() != g.image_size())
    throw ShapeError("im2col: image " + to_string(image.shape()) + " does not match geometry");
  Tensor<T> cols({g.patch_size(), g.out_pixels()});
  kernels::im2col(image.ptr(), 1, g, cols.ptr());
  require_finite(cols, "im2col");
  return cols;
}

template <typename T>
Tensor<T> col2im(const Tensor<T>& cols, const kernels::ConvGeometry& g) {
  g.validate();
  if (cols.rank() != 2 || cols.dim(0) != g.patch_size() || cols.dim(1) != g.out_pixels())
    throw ShapeError("col2im: columns " + to_string(cols.shape()) + " do not match geometry");
  Tensor<T> image({g.channels, g.height, g.width});
  kernels::col2im(cols.ptr(), 1, g, image.ptr());
  require_finite(image, "col2im");
  return image;
}

#define DFA_INSTANTIATE_OPS(T)                                                       \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> gaussian_fill<T>(Prng&, const Shape&, double, double);          \
  template Tensor<T> im2col(const Tensor<T>&, const kernels::ConvGeometry&);         \
  template Tensor<T> col2im(const Tensor<T>&, const kernels::ConvGeometry&);

DFA_INSTANTIATE_OPS(float)
DFA_INSTANTIATE_OPS(double)

}  // namespace dfa
