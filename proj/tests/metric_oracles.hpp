#pragma once

// Slow, obviously-correct reference implementations for the distribution metrics.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "loadsynth/rng.hpp"

namespace oracle {

using Set = std::vector<std::vector<double>>;

inline Set random_set(loadsynth::Rng& rng, std::size_t n, std::size_t dim) {
  std::uniform_real_distribution<double> u(0.0, 3.0);
  Set s(n, std::vector<double>(dim));
  for (auto& row : s)
    for (auto& v : row) v = u(rng);
  return s;
}

// Values on a coarse grid, so ties and repeated points occur often.
inline std::vector<double> grid_values(loadsynth::Rng& rng, std::size_t n) {
  std::uniform_int_distribution<int> k(0, 6);
  std::vector<double> v(n);
  for (auto& x : v) x = 0.5 * k(rng);
  return v;
}

inline Set grid_set(loadsynth::Rng& rng, std::size_t n, std::size_t dim) {
  Set s(n);
  for (auto& row : s) row = grid_values(rng, dim);
  return s;
}

inline double kernel(const std::vector<double>& a, const std::vector<double>& b, double h) {
  double sq = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-sq / (2 * h * h));
}

inline double mmd(const Set& x, const Set& y, double h) {
  auto mean_k = [h](const Set& p, const Set& q) {
    double s = 0;
    for (const auto& a : p)
      for (const auto& b : q) s += kernel(a, b, h);
    return s / static_cast<double>(p.size() * q.size());
  };
  return mean_k(x, x) + mean_k(y, y) - 2 * mean_k(x, y);
}

inline double median_bandwidth(const Set& x, const Set& y) {
  Set all = x;
  all.insert(all.end(), y.begin(), y.end());
  std::vector<double> d;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double sq = 0;
      for (std::size_t k = 0; k < all[i].size(); ++k) sq += (all[i][k] - all[j][k]) * (all[i][k] - all[j][k]);
      d.push_back(std::sqrt(sq));
    }
  if (d.empty()) return 1.0;
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double med = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  return med > 0 ? med : 1.0;
}

// W1 as the integral of |F^-1(u) - G^-1(u)| over u in (0, 1).
inline double wasserstein(std::vector<double> x, std::vector<double> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::vector<double> cuts{0.0, 1.0};
  for (std::size_t i = 1; i < x.size(); ++i) cuts.push_back(static_cast<double>(i) / n);
  for (std::size_t j = 1; j < y.size(); ++j) cuts.push_back(static_cast<double>(j) / m);
  std::sort(cuts.begin(), cuts.end());
  double total = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double w = cuts[k + 1] - cuts[k];
    if (w <= 0) continue;
    const double u = 0.5 * (cuts[k] + cuts[k + 1]);
    const double qx = x[static_cast<std::size_t>(std::ceil(u * n)) - 1];
    const double qy = y[static_cast<std::size_t>(std::ceil(u * m)) - 1];
    total += w * std::abs(qx - qy);
  }
  return total;
}

}  // namespace oracle
