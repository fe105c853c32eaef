#pragma once
// Bias-corrected Adam on the flat parameter vector.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hallucigrid/common.hpp"

namespace hg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  int64_t step = 0;
  std::vector<T> m;  // first moment
  std::vector<T> v;  // second moment

  explicit AdamState(size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
  size_t size() const { return m.size(); }
};

template <typename T>
struct AdamResult {
  bool applied = false;
  size_t bad_index = 0;  // first non-finite gradient when refused
};

// One update. If any gradient is non-finite the step is refused and the
// parameters are left untouched.
template <typename T>
AdamResult<T> adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state,
                        const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.size())
    throw DataError("adam_step: size mismatch");
  for (size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(static_cast<double>(grads[i]))) return {false, i};

  state.step += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    params[i] = static_cast<T>(params[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
  return {true, 0};
}

}  // namespace hg
