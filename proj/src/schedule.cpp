#include "loadsynth/schedule.hpp"

#include <stdexcept>
#include <string>

#include "loadsynth/errors.hpp"

namespace loadsynth::diffusion {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 2) throw ValidationError("noise schedule needs at least 2 steps, got " + std::to_string(steps));
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw ValidationError("noise schedule needs 0 < beta_start < beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    const double frac = static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    betas[static_cast<std::size_t>(t - 1)] = beta_start + frac * (beta_end - beta_start);
  }
  // Endpoints exactly as configured.
  betas.front() = beta_start;
  betas.back() = beta_end;
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ValidationError("noise schedule needs at least one step");
  for (double b : betas)
    if (!(b > 0.0 && b < 1.0)) throw ValidationError("every beta must lie in (0, 1)");
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : steps_(static_cast<int>(betas.size())) {
  const std::size_t n = betas.size() + 1;
  beta_.assign(n, 0.0);
  alpha_.assign(n, 1.0);
  alpha_bar_.assign(n, 1.0);
  beta_tilde_.assign(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    beta_[t] = betas[t - 1];
    alpha_[t] = 1.0 - beta_[t];
    alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
    beta_tilde_[t] = (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]) * beta_[t];
  }
}

void NoiseSchedule::check(int t) const {
  if (t < 1 || t > steps_) {
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps_) + "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check(t);
  return beta_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha(int t) const {
  check(t);
  return alpha_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  check(t);
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::beta_tilde(int t) const {
  check(t);
  return beta_tilde_[static_cast<std::size_t>(t)];
}

}  // namespace loadsynth::diffusion
