#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

namespace dfa {

enum class ActivationKind { identity, tanh, relu, lrelu, abs };

/// Pointwise non-linearity f. `slope` is the negative-side slope of lrelu and
/// may be negative: lrelu(-0.5) behaves like a damped |x|.
struct Activation {
  ActivationKind kind = ActivationKind::tanh;
  double slope = 0.01;

  /// Accepts identity, tanh, relu, abs, lrelu (slope 0.01) and lrelu(<slope>).
  static Activation parse(std::string_view text);
  std::string name() const;

  friend bool operator==(const Activation&, const Activation&) = default;
};

template <typename T>
inline T activation_eval(const Activation& f, T x) {
  switch (f.kind) {
    case ActivationKind::identity: return x;
    case ActivationKind::tanh: return std::tanh(x);
    case ActivationKind::relu: return x > T(0) ? x : T(0);
    case ActivationKind::lrelu: return x > T(0) ? x : static_cast<T>(f.slope) * x;
    case ActivationKind::abs: return std::abs(x);
  }
  return x;
}

/// f'(a). Kinks take relu'(0) = 0, lrelu'(0) = slope, abs'(0) = 0.
template <typename T>
inline T activation_deriv(const Activation& f, T a) {
  switch (f.kind) {
    case ActivationKind::identity: return T(1);
    case ActivationKind::tanh: {
      const T t = std::tanh(a);
      return T(1) - t * t;
    }
    case ActivationKind::relu: return a > T(0) ? T(1) : T(0);
    case ActivationKind::lrelu: return a > T(0) ? T(1) : static_cast<T>(f.slope);
    case ActivationKind::abs: return a > T(0) ? T(1) : (a < T(0) ? T(-1) : T(0));
  }
  return T(1);
}

/// True when `a` sits on a kink of f (where the one-sided derivatives differ).
inline bool is_kink(const Activation& f, double a) {
  return a == 0.0 && (f.kind == ActivationKind::relu || f.kind == ActivationKind::lrelu ||
                      f.kind == ActivationKind::abs);
}

template <typename T>
void activation_forward(const Activation& f, std::span<const T> in, std::span<T> out);

/// grad[i] *= f'(pre[i]).
template <typename T>
void activation_backward(const Activation& f, std::span<const T> pre, std::span<T> grad);

}  // namespace dfa
