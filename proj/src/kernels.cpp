#include "dfa/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

#include "dfa/error.hpp"

namespace dfa::kernels {

void ConvGeometry::validate() const {
  if (channels == 0 || height == 0 || width == 0 || kernel_h == 0 || kernel_w == 0 ||
      stride == 0)
    throw ShapeError("conv geometry: zero extent");
  const std::size_t span_h = height + 2 * pad;
  const std::size_t span_w = width + 2 * pad;
  if (span_h < kernel_h || span_w < kernel_w)
    throw ShapeError("conv geometry: kernel larger than padded input");
  if ((span_h - kernel_h) % stride != 0 || (span_w - kernel_w) % stride != 0)
    throw ShapeError("conv geometry: output size is not integral for this stride");
}

namespace {

using std::ptrdiff_t;
using std::size_t;

// Columns handled per register strip: two 512-bit vectors.
template <typename T>
constexpr size_t kStrip = 128 / sizeof(T);
constexpr size_t kRows = 4;
constexpr size_t kDepth = 256;

// rows x kStrip block of C held in a local accumulator across the whole
// depth slice; each element still sees its products in ascending p.
template <typename T, size_t Rows>
inline void strip_kernel(const T* a, size_t lda, const T* b, size_t ldb, T* c, size_t ldc,
                         size_t depth) {
  constexpr size_t W = kStrip<T>;
  T acc[Rows][W];
  for (size_t r = 0; r < Rows; ++r)
    for (size_t j = 0; j < W; ++j) acc[r][j] = c[r * ldc + j];
  for (size_t p = 0; p < depth; ++p) {
    const T* bp = b + p * ldb;
    for (size_t r = 0; r < Rows; ++r) {
      const T x = a[r * lda + p];
      for (size_t j = 0; j < W; ++j) acc[r][j] = acc[r][j] + x * bp[j];
    }
  }
  for (size_t r = 0; r < Rows; ++r)
    for (size_t j = 0; j < W; ++j) c[r * ldc + j] = acc[r][j];
}

template <typename T>
inline void edge_kernel(const T* a, size_t lda, const T* b, size_t ldb, T* c, size_t ldc,
                        size_t rows, size_t cols, size_t depth) {
  for (size_t r = 0; r < rows; ++r) {
    T* __restrict cr = c + r * ldc;
    for (size_t p = 0; p < depth; ++p) {
      const T x = a[r * lda + p];
      const T* __restrict bp = b + p * ldb;
      for (size_t j = 0; j < cols; ++j) cr[j] = cr[j] + x * bp[j];
    }
  }
}

template <typename T>
void gemm_nn(size_t m, size_t n, size_t k, const T* a, size_t lda, const T* b, size_t ldb,
             T* c, size_t ldc) {
  constexpr size_t W = kStrip<T>;
  const size_t row_tiles = (m + kRows - 1) / kRows;
  const size_t col_tiles = (n + W - 1) / W;
  const auto tiles = static_cast<ptrdiff_t>(row_tiles * col_tiles);
#pragma omp parallel
  for (size_t p0 = 0; p0 < k; p0 += kDepth) {
    const size_t depth = std::min(kDepth, k - p0);
#pragma omp for schedule(static)
    for (ptrdiff_t t = 0; t < tiles; ++t) {
      const size_t i0 = static_cast<size_t>(t) / col_tiles * kRows;
      const size_t j0 = static_cast<size_t>(t) % col_tiles * W;
      const size_t rows = std::min(kRows, m - i0);
      const size_t cols = std::min(W, n - j0);
      const T* at = a + i0 * lda + p0;
      const T* bt = b + p0 * ldb + j0;
      T* ct = c + i0 * ldc + j0;
      if (rows == kRows && cols == W)
        strip_kernel<T, kRows>(at, lda, bt, ldb, ct, ldc, depth);
      else
        edge_kernel(at, lda, bt, ldb, ct, ldc, rows, cols, depth);
    }
  }
}

template <typename T>
std::vector<T> transpose_pack(const T* src, size_t rows, size_t cols, size_t ld) {
  // src is rows x cols (leading dim ld); result is cols x rows, contiguous.
  std::vector<T> out(rows * cols);
#pragma omp parallel for schedule(static)
  for (ptrdiff_t j = 0; j < static_cast<ptrdiff_t>(cols); ++j)
    for (size_t i = 0; i < rows; ++i) out[static_cast<size_t>(j) * rows + i] = src[i * ld + j];
  return out;
}

}  // namespace

template <typename T>
void gemm(Op op_a, Op op_b, size_t m, size_t n, size_t k, const T* a, size_t lda, const T* b,
          size_t ldb, T* c, size_t ldc, bool accumulate) {
  if (!accumulate) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(m); ++i)
      std::fill_n(c + static_cast<size_t>(i) * ldc, n, T(0));
  }
  if (k == 0 || m == 0 || n == 0) return;
  std::vector<T> packed_a, packed_b;
  if (op_a == Op::transpose) {
    packed_a = transpose_pack(a, k, m, lda);
    a = packed_a.data();
    lda = k;
  }
  if (op_b == Op::transpose) {
    packed_b = transpose_pack(b, n, k, ldb);
    b = packed_b.data();
    ldb = n;
  }
  gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}

template <typename T>
void im2col(const T* images, size_t batch, const ConvGeometry& g, T* cols) {
  const size_t oh = g.out_h(), ow = g.out_w(), pixels = oh * ow;
  const size_t ld = batch * pixels;
  const size_t rows = g.patch_size();
  const auto work = static_cast<ptrdiff_t>(batch * rows);
#pragma omp parallel for schedule(static)
  for (ptrdiff_t w = 0; w < work; ++w) {
    const size_t s = static_cast<size_t>(w) / rows;
    const size_t r = static_cast<size_t>(w) % rows;
    const size_t ch = r / (g.kernel_h * g.kernel_w);
    const size_t ki = r / g.kernel_w % g.kernel_h;
    const size_t kj = r % g.kernel_w;
    const T* img = images + s * g.image_size() + ch * g.height * g.width;
    T* out = cols + r * ld + s * pixels;
    for (size_t y = 0; y < oh; ++y) {
      const ptrdiff_t iy = static_cast<ptrdiff_t>(y * g.stride + ki) - static_cast<ptrdiff_t>(g.pad);
      for (size_t x = 0; x < ow; ++x) {
        const ptrdiff_t ix =
            static_cast<ptrdiff_t>(x * g.stride + kj) - static_cast<ptrdiff_t>(g.pad);
        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<ptrdiff_t>(g.height) &&
                            ix < static_cast<ptrdiff_t>(g.width);
        out[y * ow + x] = inside ? img[static_cast<size_t>(iy) * g.width + static_cast<size_t>(ix)] : T(0);
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, size_t batch, const ConvGeometry& g, T* images) {
  const size_t oh = g.out_h(), ow = g.out_w(), pixels = oh * ow;
  const size_t ld = batch * pixels;
  const size_t taps = g.kernel_h * g.kernel_w;
  const auto work = static_cast<ptrdiff_t>(batch * g.channels);
#pragma omp parallel for schedule(static)
  for (ptrdiff_t w = 0; w < work; ++w) {
    const size_t s = static_cast<size_t>(w) / g.channels;
    const size_t ch = static_cast<size_t>(w) % g.channels;
    T* img = images + s * g.image_size() + ch * g.height * g.width;
    std::fill_n(img, g.height * g.width, T(0));
    for (size_t t = 0; t < taps; ++t) {
      const size_t ki = t / g.kernel_w, kj = t % g.kernel_w;
      const T* in = cols + (ch * taps + t) * ld + s * pixels;
      for (size_t y = 0; y < oh; ++y) {
        const ptrdiff_t iy = static_cast<ptrdiff_t>(y * g.stride + ki) - static_cast<ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<ptrdiff_t>(g.height)) continue;
        for (size_t x = 0; x < ow; ++x) {
          const ptrdiff_t ix =
              static_cast<ptrdiff_t>(x * g.stride + kj) - static_cast<ptrdiff_t>(g.pad);
          if (ix < 0 || ix >= static_cast<ptrdiff_t>(g.width)) continue;
          T& dst = img[static_cast<size_t>(iy) * g.width + static_cast<size_t>(ix)];
          dst = dst + in[y * ow + x];
        }
      }
    }
  }
}

namespace reference {

template <typename T>
void gemm(Op op_a, Op op_b, size_t m, size_t n, size_t k, const T* a, size_t lda, const T* b,
          size_t ldb, T* c, size_t ldc, bool accumulate) {
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      T sum = accumulate ? c[i * ldc + j] : T(0);
      for (size_t p = 0; p < k; ++p) {
        const T x = op_a == Op::none ? a[i * lda + p] : a[p * lda + i];
        const T y = op_b == Op::none ? b[p * ldb + j] : b[j * ldb + p];
        sum = sum + x * y;
      }
      c[i * ldc + j] = sum;
    }
  }
}

template <typename T>
void im2col(const T* images, size_t batch, const ConvGeometry& g, T* cols) {
  const size_t oh = g.out_h(), ow = g.out_w(), pixels = oh * ow;
  const size_t ld = batch * pixels;
  for (size_t s = 0; s < batch; ++s)
    for (size_t ch = 0; ch < g.channels; ++ch)
      for (size_t ki = 0; ki < g.kernel_h; ++ki)
        for (size_t kj = 0; kj < g.kernel_w; ++kj) {
          const size_t r = (ch * g.kernel_h + ki) * g.kernel_w + kj;
          for (size_t y = 0; y < oh; ++y)
            for (size_t x = 0; x < ow; ++x) {
              const long iy = static_cast<long>(y * g.stride + ki) - static_cast<long>(g.pad);
              const long ix = static_cast<long>(x * g.stride + kj) - static_cast<long>(g.pad);
              T v = T(0);
              if (iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                  ix < static_cast<long>(g.width))
                v = images[s * g.image_size() + (ch * g.height + static_cast<size_t>(iy)) * g.width +
                           static_cast<size_t>(ix)];
              cols[r * ld + s * pixels + y * ow + x] = v;
            }
        }
}

template <typename T>
void col2im(const T* cols, size_t batch, const ConvGeometry& g, T* images) {
  const size_t oh = g.out_h(), ow = g.out_w(), pixels = oh * ow;
  const size_t ld = batch * pixels;
  std::fill_n(images, batch * g.image_size(), T(0));
  for (size_t s = 0; s < batch; ++s)
    for (size_t ch = 0; ch < g.channels; ++ch)
      for (size_t ki = 0; ki < g.kernel_h; ++ki)
        for (size_t kj = 0; kj < g.kernel_w; ++kj) {
          const size_t r = (ch * g.kernel_h + ki) * g.kernel_w + kj;
          for (size_t y = 0; y < oh; ++y)
            for (size_t x = 0; x < ow; ++x) {
              const long iy = static_cast<long>(y * g.stride + ki) - static_cast<long>(g.pad);
              const long ix = static_cast<long>(x * g.stride + kj) - static_cast<long>(g.pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) ||
                  ix >= static_cast<long>(g.width))
                continue;
              T& dst = images[s * g.image_size() + (ch * g.height + static_cast<size_t>(iy)) * g.width +
                              static_cast<size_t>(ix)];
              dst = dst + cols[r * ld + s * pixels + y * ow + x];
            }
        }
}

}  // namespace reference

#define DFA_INSTANTIATE_KERNELS(T)                                                          \
  template void gemm<T>(Op, Op, size_t, size_t, size_t, const T*, size_t, const T*, size_t, \
                        T*, size_t, bool);                                                  \
  template void im2col<T>(const T*, size_t, const ConvGeometry&, T*);                       \
  template void col2im<T>(const T*, size_t, const ConvGeometry&, T*);                       \
  template void reference::gemm<T>(Op, Op, size_t, size_t, size_t, const T*, size_t,       \
                                   const T*, size_t, T*, size_t, bool);                     \
  template void reference::im2col<T>(const T*, size_t, const ConvGeometry&, T*);            \
  template void reference::col2im<T>(const T*, size_t, const ConvGeometry&, T*);

DFA_INSTANTIATE_KERNELS(float)
DFA_INSTANTIATE_KERNELS(double)

}  // namespace dfa::kernels
