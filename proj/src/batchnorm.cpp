#include "dfa/batchnorm.hpp"

#include <cmath>

#include "dfa/error.hpp"

namespace dfa {

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t features)
    : gamma_({features}, T(1)),
      beta_({features}, T(0)),
      running_mean_({features}, T(0)),
      running_var_({features}, T(1)) {}

template <typename T>
void BatchNorm<T>::clear_cache() {
  xhat_ = Tensor<T>();
  inv_std_.clear();
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, std::size_t spatial, BnStats stats,
                                bool update_running, bool store_cache) {
  const std::size_t batch = x.rows();
  const std::size_t features = gamma_.size();
  if (spatial == 0 || x.size() != batch * features * spatial)
    throw ShapeError("batchnorm: input " + to_string(x.shape()) + " does not have " +
                     std::to_string(features) + " features");
  fallback_ = false;
  if (stats == BnStats::running && !has_running_) {
    stats = BnStats::batch;
    update_running = false;
    fallback_ = true;
  }
  if (stats == BnStats::batch && batch < 2)
    throw ParameterError("batchnorm: batch statistics need at least 2 samples");

  const std::size_t count = batch * spatial;
  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(features);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t fi = 0; fi < static_cast<std::ptrdiff_t>(features); ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    double mean, var;
    if (stats == BnStats::batch) {
      double sum = 0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t s = 0; s < spatial; ++s) sum += x[(b * features + f) * spatial + s];
      mean = sum / static_cast<double>(count);
      double sq = 0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t s = 0; s < spatial; ++s) {
          const double d = x[(b * features + f) * spatial + s] - mean;
          sq += d * d;
        }
      var = sq / static_cast<double>(count);
      if (update_running) {
        const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
        running_mean_[f] = static_cast<T>(kMomentum * running_mean_[f] + (1 - kMomentum) * mean);
        running_var_[f] = static_cast<T>(kMomentum * running_var_[f] + (1 - kMomentum) * unbiased);
      }
    } else {
      mean = running_mean_[f];
      var = running_var_[f];
    }
    const double istd = 1.0 / std::sqrt(var + kEpsilon);
    inv_std[f] = static_cast<T>(istd);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (b * features + f) * spatial + s;
        const T xh = static_cast<T>((x[i] - mean) * istd);
        xhat[i] = xh;
        y[i] = gamma_[f] * xh + beta_[f];
      }
  }
  if (update_running && stats == BnStats::batch) has_running_ = true;
  if (store_cache) {
    xhat_ = std::move(xhat);
    inv_std_ = std::move(inv_std);
    spatial_ = spatial;
    cached_stats_ = stats;
  }
  return y;
}

template <typename T>
typename BatchNorm<T>::Gradients BatchNorm<T>::backward(const Tensor<T>& grad, bool need_params,
                                                        bool need_input) const {
  if (xhat_.empty()) throw StateError("batchnorm: backward without a cached forward");
  if (grad.shape() != xhat_.shape()) throw ShapeError("batchnorm: gradient shape mismatch");
  const std::size_t batch = grad.rows();
  const std::size_t features = gamma_.size();
  const std::size_t spatial = spatial_;
  const double count = static_cast<double>(batch * spatial);

  Gradients out;
  if (need_params) {
    out.dgamma = Tensor<T>({features});
    out.dbeta = Tensor<T>({features});
  }
  if (need_input) out.dx = Tensor<T>(grad.shape());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t fi = 0; fi < static_cast<std::ptrdiff_t>(features); ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    double sum_g = 0, sum_gx = 0;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (b * features + f) * spatial + s;
        sum_g += grad[i];
        sum_gx += static_cast<double>(grad[i]) * xhat_[i];
      }
    if (need_params) {
      out.dgamma[f] = static_cast<T>(sum_gx / static_cast<double>(batch));
      out.dbeta[f] = static_cast<T>(sum_g / static_cast<double>(batch));
    }
    if (!need_input) continue;
    const double g = gamma_[f];
    const double istd = inv_std_[f];
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (b * features + f) * spatial + s;
        double dx;
        if (cached_stats_ == BnStats::batch)
          dx = g * istd * (grad[i] - sum_g / count - xhat_[i] * sum_gx / count);
        else
          dx = g * istd * grad[i];
        out.dx[i] = static_cast<T>(dx);
      }
  }
  return out;
}

template class BatchNorm<float>;
template class BatchNorm<double>;

}  // namespace dfa
