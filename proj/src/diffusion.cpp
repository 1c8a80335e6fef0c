#include "loadsynth/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "loadsynth/errors.hpp"
#include "loadsynth/rng.hpp"

namespace loadsynth::diffusion {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

}  // namespace

std::vector<double> forward_diffuse(std::span<const double> x0, int t, std::span<const double> epsilon,
                                    const NoiseSchedule& schedule) {
  check_lengths(x0, epsilon, "forward_diffuse");
  schedule.beta(t);  // rejects t outside [1, T]
  const double ab = schedule.alpha_bar(t);
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  std::vector<double> xt(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) xt[i] = signal * x0[i] + noise * epsilon[i];
  return xt;
}

BoundEstimator NoiseModel::bind(const Condition& condition) const {
  return [this, condition](const Tensor& xt, int t) {
    ad::NoGradGuard no_grad;
    return estimate(ad::Var::constant(xt), t, condition).value();
  };
}

ad::Var training_loss(std::span<const double> x0, const Condition& condition, int t, std::span<const double> epsilon,
                      const NoiseModel& model, const NoiseSchedule& schedule) {
  auto xt = forward_diffuse(x0, t, epsilon, schedule);
  const auto n = xt.size();
  ad::Var eps_hat = model.estimate(ad::Var::constant(Tensor({n}, std::move(xt))), t, condition);
  ad::Var target = ad::Var::constant(Tensor({n}, std::vector<double>(epsilon.begin(), epsilon.end())));
  return ad::sum_squared_error(target, eps_hat);
}

std::vector<double> reverse_mean(std::span<const double> xt, int t, std::span<const double> eps_hat,
                                 const NoiseSchedule& schedule) {
  check_lengths(xt, eps_hat, "reverse_mean");
  const double coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
  std::vector<double> mu(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) mu[i] = inv_sqrt_alpha * (xt[i] - coef * eps_hat[i]);
  return mu;
}

namespace {

std::vector<double> step_from_estimate(std::span<const double> xt, int t, std::span<const double> eps_hat,
                                       const NoiseSchedule& schedule, std::span<const double> draw) {
  auto out = reverse_mean(xt, t, eps_hat, schedule);
  if (t > 1) {
    check_lengths(xt, draw, "reverse_step");
    const double sigma = std::sqrt(schedule.beta_tilde(t));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * draw[i];
  }
  return out;
}

}  // namespace

std::vector<double> reverse_step(std::span<const double> xt, int t, const Condition& condition, const NoiseModel& model,
                                 const NoiseSchedule& schedule, std::span<const double> epsilon_draw) {
  schedule.beta(t);  // range check before running the model
  ad::NoGradGuard no_grad;
  const Tensor eps_hat =
      model.estimate(ad::Var::constant(Tensor({xt.size()}, std::vector<double>(xt.begin(), xt.end()))), t, condition).value();
  return step_from_estimate(xt, t, eps_hat.data(), schedule, epsilon_draw);
}

void SeededNoise::initial(std::span<double> out) {
  Rng rng = make_rng(derive_seed(seed_, "x_T"));
  fill_normal(rng, out);
}

void SeededNoise::step(int t, std::span<double> out) {
  Rng rng = make_rng(derive_seed(seed_, static_cast<std::uint64_t>(t)));
  fill_normal(rng, out);
}

std::vector<double> sample(const NoiseModel& model, const NoiseSchedule& schedule, const Condition& condition,
                           SamplingNoise& noise, std::size_t length) {
  const BoundEstimator estimator = model.bind(condition);
  std::vector<double> x(length);
  noise.initial(x);
  std::vector<double> draw(length);
  for (int t = schedule.steps(); t >= 1; --t) {
    noise.step(t, draw);
    if (t == 1) std::fill(draw.begin(), draw.end(), 0.0);
    const Tensor eps_hat = estimator(Tensor({length}, x), t);
    x = step_from_estimate(x, t, eps_hat.data(), schedule, draw);
  }
  return x;
}

std::vector<double> sample(const NoiseModel& model, const NoiseSchedule& schedule, const Condition& condition,
                           std::uint64_t seed, std::size_t length) {
  SeededNoise noise(seed);
  return sample(model, schedule, condition, noise, length);
}

std::vector<double> synthesize(const Condition& condition, const NoiseModel& model, const NoiseSchedule& schedule,
                               std::uint64_t seed, const data::NormalizationStats& stats) {
  return data::denormalize(sample(model, schedule, condition, seed), stats);
}

std::vector<double> train(TrainableNoiseModel& model, const NoiseSchedule& schedule,
                          std::span<const TrainingExample> examples, const TrainOptions& options) {
  if (options.epochs < 0) throw ValidationError("epoch count must be non-negative");
  if (options.batch_size < 1) throw ValidationError("batch size must be positive");
  if (examples.empty()) throw ValidationError("training needs a non-empty dataset");

  ad::ParameterSet& params = model.parameters();
  ad::Adam optimizer(options.adam, params);
  Rng rng = make_rng(options.seed);
  std::uniform_int_distribution<int> timestep(1, schedule.steps());
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(options.batch_size);

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(options.epochs));
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<ad::Var> losses;
      losses.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const TrainingExample& ex = examples[order[k]];
        const int t = timestep(rng);
        std::vector<double> eps(ex.x0.size());
        fill_normal(rng, eps);
        losses.push_back(training_loss(ex.x0, ex.condition, t, eps, model, schedule));
      }
      const ad::Var batch_loss =
          ad::scale(ad::sum(ad::concat(losses, 0)), 1.0 / static_cast<double>(losses.size()));
      const double value = batch_loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index + 1));
      }
      epoch_total += value * static_cast<double>(losses.size());
      const auto grads = params.gradients(ad::backward(batch_loss));
      optimizer.step(params, grads);
    }
    const double mean_loss = epoch_total / static_cast<double>(examples.size());
    history.push_back(mean_loss);
    if (options.on_epoch) options.on_epoch(epoch, mean_loss);
  }
  return history;
}

}  // namespace loadsynth::diffusion
