#include "dfa/block.hpp"

#include <cmath>
#include <sstream>

#include "dfa/error.hpp"
#include "dfa/format.hpp"
#include "dfa/instrumentation.hpp"
#include "dfa/ops.hpp"

namespace dfa {

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::fc: return "fc";
    case BlockKind::conv: return "conv";
    case BlockKind::maxpool: return "maxpool";
    case BlockKind::dropout: return "dropout";
  }
  return "?";
}

Shape BlockConfig::output_shape(const Shape& input) const {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ParameterError("block: dropout rate must lie in [0, 1)");
  switch (kind) {
    case BlockKind::fc:
      if (units == 0) throw ParameterError("fc: zero output features");
      return {units};
    case BlockKind::conv: {
      if (units == 0) throw ParameterError("conv: zero output channels");
      const auto g = conv_geometry(input, kernel, kernel, stride, pad);
      return {units, g.out_h(), g.out_w()};
    }
    case BlockKind::maxpool:
      if (input.size() != 3 || input[1] < 2 || input[2] < 2)
        throw ShapeError("maxpool: needs a C x H x W input with H, W >= 2");
      return {input[0], input[1] / 2, input[2] / 2};
    case BlockKind::dropout:
      return input;
  }
  throw ParameterError("block: unknown kind");
}

std::string BlockConfig::describe() const {
  std::ostringstream os;
  os << dfa::to_string(kind);
  switch (kind) {
    case BlockKind::fc:
      os << ' ' << units << " act=" << activation.name();
      break;
    case BlockKind::conv:
      os << ' ' << units << " kernel=" << kernel << " stride=" << stride << " pad=" << pad
         << " act=" << activation.name();
      break;
    case BlockKind::maxpool:
      return os.str();
    case BlockKind::dropout:
      os << ' ' << format_number(dropout_rate);
      return os.str();
  }
  if (dropout_rate > 0) os << " dropout=" << format_number(dropout_rate);
  if (batchnorm) os << " bn=on";
  return os.str();
}

template <typename T>
Block<T>::Block(BlockConfig config, Shape input_shape, int layer, Prng* init_rng)
    : config_(std::move(config)), input_shape_(std::move(input_shape)), layer_(layer) {
  output_shape_ = config_.output_shape(input_shape_);
  if (!config_.has_parameters()) return;
  std::size_t fan_in = shape_size(input_shape_);
  if (config_.kind == BlockKind::conv) {
    geometry_ = conv_geometry(input_shape_, config_.kernel, config_.kernel, config_.stride,
                              config_.pad);
    fan_in = geometry_.patch_size();
  }
  if (!init_rng) throw ParameterError("block: parameterized block needs an init rng");
  weights_ = gaussian_fill<T>(*init_rng, {config_.units, fan_in}, 0.0,
                              std::sqrt(2.0 / static_cast<double>(fan_in)));
  bias_ = Tensor<T>({config_.units});
  if (config_.batchnorm) bn_.emplace(config_.units);
}

template <typename T>
void Block<T>::clear_cache() {
  cached_ = false;
  have_grad_affine_ = false;
  input_ = cols_ = act_in_ = mask_ = grad_affine_ = Tensor<T>();
  argmax_.clear();
  if (bn_) bn_->clear_cache();
}

template <typename T>
Tensor<T> Block<T>::affine_forward(const Tensor<T>& input, bool store) {
  const std::size_t batch = input.rows();
  const std::size_t units = config_.units;
  if (config_.kind == BlockKind::fc) {
    const std::size_t fan_in = weights_.dim(1);
    Tensor<T> a({batch, units});
    kernels::gemm(kernels::Op::none, kernels::Op::transpose, batch, units, fan_in, input.ptr(),
                  fan_in, weights_.ptr(), fan_in, a.ptr(), units);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < units; ++o) a[b * units + o] = a[b * units + o] + bias_[o];
    if (store) input_ = input.reshaped({batch, fan_in});
    return a;
  }
  const std::size_t pixels = geometry_.out_pixels();
  const std::size_t patch = geometry_.patch_size();
  Tensor<T> cols({patch, batch * pixels});
  kernels::im2col(input.ptr(), batch, geometry_, cols.ptr());
  Tensor<T> acm({units, batch * pixels});
  kernels::gemm(kernels::Op::none, kernels::Op::none, units, batch * pixels, patch,
                weights_.ptr(), patch, cols.ptr(), batch * pixels, acm.ptr(), batch * pixels);
  Shape out_shape{batch};
  out_shape.insert(out_shape.end(), output_shape_.begin(), output_shape_.end());
  Tensor<T> a(out_shape);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t w = 0; w < static_cast<std::ptrdiff_t>(batch * units); ++w) {
    const std::size_t b = static_cast<std::size_t>(w) / units;
    const std::size_t c = static_cast<std::size_t>(w) % units;
    const T* src = acm.ptr() + c * batch * pixels + b * pixels;
    T* dst = a.ptr() + (b * units + c) * pixels;
    for (std::size_t p = 0; p < pixels; ++p) dst[p] = src[p] + bias_[c];
  }
  if (store) cols_ = std::move(cols);
  return a;
}

template <typename T>
void Block<T>::apply_dropout(Tensor<T>& h, bool store, Prng* rng) {
  if (!rng) throw ParameterError("dropout: training-mode forward needs an rng");
  const double p = config_.dropout_rate;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  Tensor<T> mask(h.shape());
  for (std::size_t i = 0; i < h.size(); ++i) {
    mask[i] = rng->uniform() <= p ? T(0) : keep_scale;
    h[i] = h[i] * mask[i];
  }
  if (store) mask_ = std::move(mask);
}

template <typename T>
Tensor<T> Block<T>::pool_forward(const Tensor<T>& input, bool store) {
  const std::size_t batch = input.rows();
  const std::size_t ch = input_shape_[0], ih = input_shape_[1], iw = input_shape_[2];
  const std::size_t oh = output_shape_[1], ow = output_shape_[2];
  Tensor<T> out({batch, ch, oh, ow});
  std::vector<std::uint32_t> argmax(out.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          const std::size_t base = c * ih * iw;
          std::size_t best = base + 2 * y * iw + 2 * x;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = base + (2 * y + dy) * iw + 2 * x + dx;
              if (input[b * ch * ih * iw + idx] > input[b * ch * ih * iw + best]) best = idx;
            }
          const std::size_t o = ((b * ch + c) * oh + y) * ow + x;
          out[o] = input[b * ch * ih * iw + best];
          argmax[o] = static_cast<std::uint32_t>(best);
        }
  if (store) argmax_ = std::move(argmax);
  return out;
}

template <typename T>
Tensor<T> Block<T>::pool_backward(const Tensor<T>& grad) const {
  const std::size_t in_size = shape_size(input_shape_);
  const std::size_t out_size = shape_size(output_shape_);
  Shape shape{batch_};
  shape.insert(shape.end(), input_shape_.begin(), input_shape_.end());
  Tensor<T> gx(shape);
  for (std::size_t b = 0; b < batch_; ++b)
    for (std::size_t o = 0; o < out_size; ++o) {
      T& dst = gx[b * in_size + argmax_[b * out_size + o]];
      dst = dst + grad[b * out_size + o];
    }
  return gx;
}

template <typename T>
Tensor<T> Block<T>::forward(const Tensor<T>& input, const ForwardOptions& options, Prng* rng) {
  if (input.rows() == 0 || input.row_size() != shape_size(input_shape_))
    throw ShapeError(dfa::to_string(config_.kind) + ": input " + dfa::to_string(input.shape()) +
                     " does not match per-sample shape " + dfa::to_string(input_shape_));
  const bool store = options.store_caches;
  const std::size_t batch = input.rows();
  if (store) clear_cache();
  const bool drop = options.train && config_.dropout_rate > 0.0;

  Tensor<T> out;
  switch (config_.kind) {
    case BlockKind::dropout:
      out = input;
      if (drop) apply_dropout(out, store, rng);
      break;
    case BlockKind::maxpool:
      out = pool_forward(input, store);
      break;
    case BlockKind::fc:
    case BlockKind::conv: {
      Tensor<T> a = affine_forward(input, store);
      if (bn_) {
        const std::size_t spatial = config_.kind == BlockKind::conv ? geometry_.out_pixels() : 1;
        a = bn_->forward(a, spatial, options.train ? BnStats::batch : BnStats::running,
                         options.train && options.update_running_stats, store);
      }
      out = Tensor<T>(a.shape());
      activation_forward<T>(config_.activation, a.data(), out.data());
      if (store) act_in_ = std::move(a);
      if (drop) apply_dropout(out, store, rng);
      break;
    }
  }
  if (store) {
    cached_ = true;
    batch_ = batch;
  }
  return out;
}

template <typename T>
BlockGradients<T> Block<T>::param_backward(const Tensor<T>& grad_output, bool need_params) {
  if (!cached_) throw StateError("block: backward without cached forward");
  if (grad_output.rows() != batch_ || grad_output.row_size() != output_size())
    throw ShapeError("block: gradient " + dfa::to_string(grad_output.shape()) +
                     " does not match output " + dfa::to_string(output_shape_));
  Shape shape{batch_};
  shape.insert(shape.end(), output_shape_.begin(), output_shape_.end());
  Tensor<T> g = grad_output.reshaped(shape);
  if (!mask_.empty())
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * mask_[i];

  BlockGradients<T> grads;
  have_grad_affine_ = true;
  if (config_.kind == BlockKind::dropout) {
    grad_affine_ = std::move(g);
    return grads;
  }
  if (config_.kind == BlockKind::maxpool) {
    grad_affine_ = pool_backward(g);
    return grads;
  }

  activation_backward<T>(config_.activation, act_in_.data(), g.data());
  if (bn_) {
    instrumentation::record_param_read(layer_);
    auto bg = bn_->backward(g, need_params, true);
    g = std::move(bg.dx);
    grads.gamma = std::move(bg.dgamma);
    grads.beta = std::move(bg.dbeta);
  }

  const std::size_t units = config_.units;
  const std::size_t fan_in = weights_.dim(1);
  const T batch = static_cast<T>(batch_);
  if (config_.kind == BlockKind::fc) {
    grad_affine_ = std::move(g);
    if (need_params) {
      grads.weights = Tensor<T>(weights_.shape());
      kernels::gemm(kernels::Op::transpose, kernels::Op::none, units, fan_in, batch_,
                    grad_affine_.ptr(), units, input_.ptr(), fan_in, grads.weights.ptr(), fan_in);
      for (auto& v : grads.weights.data()) v = v / batch;
      grads.bias = Tensor<T>({units});
      for (std::size_t o = 0; o < units; ++o) {
        T sum = T(0);
        for (std::size_t b = 0; b < batch_; ++b) sum = sum + grad_affine_[b * units + o];
        grads.bias[o] = sum / batch;
      }
    }
    return grads;
  }

  // conv: regroup to channels x (batch * pixels) to match the patch matrix.
  const std::size_t pixels = geometry_.out_pixels();
  const std::size_t cols = batch_ * pixels;
  Tensor<T> gcm({units, cols});
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t w = 0; w < static_cast<std::ptrdiff_t>(batch_ * units); ++w) {
    const std::size_t b = static_cast<std::size_t>(w) / units;
    const std::size_t c = static_cast<std::size_t>(w) % units;
    std::copy_n(g.ptr() + (b * units + c) * pixels, pixels, gcm.ptr() + c * cols + b * pixels);
  }
  grad_affine_ = std::move(gcm);
  if (need_params) {
    grads.weights = Tensor<T>(weights_.shape());
    kernels::gemm(kernels::Op::none, kernels::Op::transpose, units, fan_in, cols,
                  grad_affine_.ptr(), cols, cols_.ptr(), cols, grads.weights.ptr(), fan_in);
    for (auto& v : grads.weights.data()) v = v / batch;
    grads.bias = Tensor<T>({units});
    for (std::size_t c = 0; c < units; ++c) {
      T sum = T(0);
      for (std::size_t i = 0; i < cols; ++i) sum = sum + grad_affine_[c * cols + i];
      grads.bias[c] = sum / batch;
    }
  }
  return grads;
}

template <typename T>
Tensor<T> Block<T>::input_backward() {
  if (!have_grad_affine_) throw StateError("block: input_backward before param_backward");
  Shape shape{batch_};
  shape.insert(shape.end(), input_shape_.begin(), input_shape_.end());
  if (!config_.has_parameters()) return grad_affine_.reshaped(shape);

  instrumentation::record_param_read(layer_);
  const std::size_t units = config_.units;
  const std::size_t fan_in = weights_.dim(1);
  Tensor<T> gx(shape);
  if (config_.kind == BlockKind::fc) {
    kernels::gemm(kernels::Op::none, kernels::Op::none, batch_, fan_in, units, grad_affine_.ptr(),
                  units, weights_.ptr(), fan_in, gx.ptr(), fan_in);
    return gx;
  }
  const std::size_t cols = batch_ * geometry_.out_pixels();
  Tensor<T> dcols({fan_in, cols});
  kernels::gemm(kernels::Op::transpose, kernels::Op::none, fan_in, cols, units, weights_.ptr(),
                fan_in, grad_affine_.ptr(), cols, dcols.ptr(), cols);
  kernels::col2im(dcols.ptr(), batch_, geometry_, gx.ptr());
  return gx;
}

template <typename T>
BlockGradients<T> Block<T>::backward(const Tensor<T>& grad_output, bool need_input,
                                     Tensor<T>* grad_input) {
  auto grads = param_backward(grad_output, true);
  if (need_input && grad_input) *grad_input = input_backward();
  return grads;
}

template class Block<float>;
template class Block<double>;

}  // namespace dfa
