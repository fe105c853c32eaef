#pragma once
// Masked binary cross entropy and the weighted loss combination. Each pair's
// loss is the mean BCE over its valid cells; invalid cells contribute nothing
// to the value or the gradient.

#include <cmath>
#include <span>

#include "hallucigrid/tensor.hpp"

namespace hg {

// Mean over valid cells of -[t*log(p) + (1-t)*log(1-p)], computed directly on
// predictions. Preconditions: predictions in (0,1), targets in [0,1].
template <typename T>
double masked_bce(const Tensor4<T>& pred, const Tensor4<T>& target,
                  const Tensor4<uint8_t>& valid) {
  if (!pred.same_shape(target)) throw DataError("masked_bce: pred/target shape mismatch");
  if (pred.n != valid.n || pred.c != valid.c || pred.h != valid.h || pred.w != valid.w)
    throw DataError("masked_bce: valid mask shape mismatch");
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!valid.v[i]) continue;
    const double p = pred.v[i];
    const double t = target.v[i];
    sum += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    ++count;
  }
  if (count == 0) throw DataError("masked_bce: batch has zero valid cells");
  return sum / static_cast<double>(count);
}

// Same loss evaluated from pre-sigmoid logits:
//   bce(sigmoid(z), t) = softplus(z) - t*z,  softplus(z) = max(z,0) + log1p(exp(-|z|))
// This form is finite for every finite logit, even where the float sigmoid
// saturates to exactly 0 or 1.
template <typename T>
double masked_bce_from_logits(const Tensor4<T>& logits, const Tensor4<T>& target,
                              const Tensor4<uint8_t>& valid) {
  if (!logits.same_shape(target))
    throw DataError("masked_bce_from_logits: shape mismatch");
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (!valid.v[i]) continue;
    const double z = logits.v[i];
    const double t = target.v[i];
    sum += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - t * z;
    ++count;
  }
  if (count == 0) throw DataError("masked_bce_from_logits: batch has zero valid cells");
  return sum / static_cast<double>(count);
}

// Accumulates scale * d(masked_bce)/d(logits) = scale * (sigmoid(z)-t)/N on the
// valid cells. Returns the number of valid cells.
template <typename T>
size_t masked_bce_logit_grad(const Tensor4<T>& logits, const Tensor4<T>& target,
                             const Tensor4<uint8_t>& valid, double scale,
                             Tensor4<T>& dlogits) {
  size_t count = 0;
  for (size_t i = 0; i < logits.size(); ++i) count += valid.v[i] != 0;
  if (count == 0) return 0;
  const double k = scale / static_cast<double>(count);
  for (size_t i = 0; i < logits.size(); ++i) {
    if (!valid.v[i]) continue;
    const double z = logits.v[i];
    const double s = 1.0 / (1.0 + std::exp(-z));
    dlogits.v[i] += static_cast<T>(k * (s - static_cast<double>(target.v[i])));
  }
  return count;
}

inline double total_loss(double l1, double l2, double l3, double lambda1, double lambda2,
                         double lambda3) {
  return lambda1 * l1 + lambda2 * l2 + lambda3 * l3;
}

}  // namespace hg
