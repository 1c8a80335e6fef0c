#pragma once

#include <vector>

namespace loadsynth::diffusion {

// Per-step tables for t = 1..T. alpha_bar(0) is defined as 1.
class NoiseSchedule {
 public:
  // beta[t] = beta_start + (t - 1) / (T - 1) * (beta_end - beta_start).
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);
  // Arbitrary betas in (0, 1), one per step; used for degenerate-limit checks.
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return steps_; }
  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;  // t in 0..T
  double beta_tilde(int t) const;

  double beta_start() const { return beta_[1]; }
  double beta_end() const { return beta_[steps_]; }

 private:
  explicit NoiseSchedule(std::vector<double> betas);
  void check(int t) const;

  int steps_ = 0;
  // Index 0 is padding so that index == timestep.
  std::vector<double> beta_, alpha_, alpha_bar_, beta_tilde_;
};

inline NoiseSchedule build_schedule(int steps, double beta_start, double beta_end) {
  return NoiseSchedule::linear(steps, beta_start, beta_end);
}

}  // namespace loadsynth::diffusion
