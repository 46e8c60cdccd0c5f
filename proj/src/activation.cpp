#include "dfa/activation.hpp"

#include <cstddef>

#include "dfa/error.hpp"
#include "dfa/format.hpp"

namespace dfa {

Activation Activation::parse(std::string_view text) {
  if (text == "identity" || text == "linear") return {ActivationKind::identity, 0.0};
  if (text == "tanh") return {ActivationKind::tanh, 0.0};
  if (text == "relu") return {ActivationKind::relu, 0.0};
  if (text == "abs") return {ActivationKind::abs, 0.0};
  if (text == "lrelu") return {ActivationKind::lrelu, 0.01};
  if (text.starts_with("lrelu(") && text.ends_with(")")) {
    const std::string inner(text.substr(6, text.size() - 7));
    std::size_t used = 0;
    double slope = 0;
    try {
      slope = std::stod(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != inner.size() || inner.empty())
      throw ParameterError("activation: bad lrelu slope in '" + std::string(text) + "'");
    return {ActivationKind::lrelu, slope};
  }
  throw ParameterError("activation: unknown kind '" + std::string(text) + "'");
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::identity: return "identity";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::relu: return "relu";
    case ActivationKind::abs: return "abs";
    case ActivationKind::lrelu:
      return "lrelu(" + format_number(slope) + ")";
  }
  return "identity";
}

template <typename T>
void activation_forward(const Activation& f, std::span<const T> in, std::span<T> out) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = activation_eval(f, in[i]);
}

template <typename T>
void activation_backward(const Activation& f, std::span<const T> pre, std::span<T> grad) {
  const auto n = static_cast<std::ptrdiff_t>(pre.size());
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::ptrdiff_t i = 0; i < n; ++i) grad[i] = grad[i] * activation_deriv(f, pre[i]);
}

template void activation_forward<float>(const Activation&, std::span<const float>, std::span<float>);
template void activation_forward<double>(const Activation&, std::span<const double>, std::span<double>);
template void activation_backward<float>(const Activation&, std::span<const float>, std::span<float>);
template void activation_backward<double>(const Activation&, std::span<const double>, std::span<double>);

}  // namespace dfa
