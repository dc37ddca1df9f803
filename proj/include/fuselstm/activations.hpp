#pragma once

#include <algorithm>
#include <cmath>

#include "fuselstm/matrix.hpp"

namespace fuselstm {

// Branch on the sign so the exponential never overflows.
inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vector sigmoid(const Vector& x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
  return y;
}

inline Vector tanh_act(const Vector& x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

// Max-subtracted softmax.
inline Vector softmax(const Vector& logits) {
  Vector y(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    y[i] = std::exp(logits[i] - m);
    sum += y[i];
  }
  for (auto& v : y) v /= sum;
  return y;
}

// grad_logits = J_softmax^T grad_probs = p .* (g - <p, g>)
inline Vector softmax_backward(const Vector& probs, const Vector& grad_probs) {
  check_same_len("softmax_backward", probs, grad_probs);
  const double pg = dot(probs, grad_probs);
  Vector g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = probs[i] * (grad_probs[i] - pg);
  return g;
}

}  // namespace fuselstm
