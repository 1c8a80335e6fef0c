#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "loadsynth/adam.hpp"
#include "loadsynth/autodiff.hpp"
#include "loadsynth/data.hpp"
#include "loadsynth/schedule.hpp"

namespace loadsynth::diffusion {

using data::Condition;

// x_t = sqrt(alpha_bar[t]) x0 + sqrt(1 - alpha_bar[t]) eps
std::vector<double> forward_diffuse(std::span<const double> x0, int t, std::span<const double> epsilon,
                                    const NoiseSchedule& schedule);

// Noise estimate for xt at step t, closed over a fixed condition.
using BoundEstimator = std::function<Tensor(const Tensor& xt, int t)>;

// eps_theta(x_t, t | x_c).
class NoiseModel {
 public:
  virtual ~NoiseModel() = default;
  virtual ad::Var estimate(const ad::Var& xt, int t, const Condition& condition) const = 0;
  // Inference-only closure; implementations may cache condition-only work.
  virtual BoundEstimator bind(const Condition& condition) const;
};

class TrainableNoiseModel : public NoiseModel {
 public:
  virtual ad::ParameterSet& parameters() = 0;
};

// ||eps - eps_theta(forward_diffuse(x0, t, eps), t | x_c)||^2, summed over the sequence.
ad::Var training_loss(std::span<const double> x0, const Condition& condition, int t, std::span<const double> epsilon,
                      const NoiseModel& model, const NoiseSchedule& schedule);

// mu = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t)
std::vector<double> reverse_mean(std::span<const double> xt, int t, std::span<const double> eps_hat,
                                 const NoiseSchedule& schedule);

// mu + sqrt(beta_tilde_t) * draw for t > 1; mu exactly at t = 1.
std::vector<double> reverse_step(std::span<const double> xt, int t, const Condition& condition, const NoiseModel& model,
                                 const NoiseSchedule& schedule, std::span<const double> epsilon_draw);

// Gaussian draws consumed by the sampler. The step-t draw is only used for t > 1.
class SamplingNoise {
 public:
  virtual ~SamplingNoise() = default;
  virtual void initial(std::span<double> out) = 0;
  virtual void step(int t, std::span<double> out) = 0;
};

// x_T from derive_seed(seed, "x_T"); the step-t draw from derive_seed(seed, t).
class SeededNoise : public SamplingNoise {
 public:
  explicit SeededNoise(std::uint64_t seed) : seed_(seed) {}
  void initial(std::span<double> out) override;
  void step(int t, std::span<double> out) override;

 private:
  std::uint64_t seed_;
};

// Reverse chain from x_T down to x_0, in normalized units.
std::vector<double> sample(const NoiseModel& model, const NoiseSchedule& schedule, const Condition& condition,
                           SamplingNoise& noise, std::size_t length = data::kSlotsPerDay);
std::vector<double> sample(const NoiseModel& model, const NoiseSchedule& schedule, const Condition& condition,
                           std::uint64_t seed, std::size_t length = data::kSlotsPerDay);

// sample() followed by denormalization with the customer's statistics.
std::vector<double> synthesize(const Condition& condition, const NoiseModel& model, const NoiseSchedule& schedule,
                               std::uint64_t seed, const data::NormalizationStats& stats);

// ---- training --------------------------------------------------------------

struct TrainingExample {
  std::vector<double> x0;  // normalized profile
  Condition condition;
};

struct TrainOptions {
  int epochs = 200;
  int batch_size = 16;
  ad::AdamOptions adam{};
  std::uint64_t seed = 0;  // shuffling, timestep and noise draws
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

// Each epoch shuffles the examples, and every batch element draws its own
// t ~ U{1..T} and eps ~ N(0, I); the Adam step uses the batch-mean loss.
// Returns the mean per-example loss of every epoch.
std::vector<double> train(TrainableNoiseModel& model, const NoiseSchedule& schedule,
                          std::span<const TrainingExample> examples, const TrainOptions& options);

}  // namespace loadsynth::diffusion
