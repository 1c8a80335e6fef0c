#pragma once

// Test-only central finite differences; independent of the reverse-mode path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "loadsynth/autodiff.hpp"
#include "loadsynth/rng.hpp"

namespace fd {

using loadsynth::Tensor;
using loadsynth::ad::Var;

// d f / d p for every entry of every parameter, by (f(p+h) - f(p-h)) / 2h.
inline std::vector<Tensor> numeric_gradients(const std::function<double()>& f, std::vector<Var> params, double h = 1e-5) {
  std::vector<Tensor> out;
  for (auto& p : params) {
    Tensor& value = p.mutable_value();
    Tensor g(value.shape(), 0.0);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = f();
      value[i] = saved - h;
      const double down = f();
      value[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(const Tensor& a, const Tensor& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// Relative error below rel_tol, or both gradients below zero_tol in norm.
// The second branch covers structurally zero gradients (e.g. the key bias of
// an attention head, which shifts every score in a softmax row equally), where
// the ratio is pure round-off.
inline bool gradients_match(const Tensor& reverse, const Tensor& numeric, double rel_tol = 1e-4, double zero_tol = 1e-7) {
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < reverse.size(); ++i) {
    na += reverse[i] * reverse[i];
    nb += numeric[i] * numeric[i];
  }
  if (std::sqrt(std::max(na, nb)) < zero_tol) return true;
  return relative_error(reverse, numeric) < rel_tol;
}

inline Tensor random_tensor(loadsynth::Rng& rng, loadsynth::Shape shape, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

}  // namespace fd
