#include "loadsynth/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "loadsynth/errors.hpp"
#include "loadsynth/estimator.hpp"

namespace loadsynth::eval {

std::vector<ForecastPair> make_forecast_pairs(const data::ProfileMap& profiles) {
  std::vector<ForecastPair> pairs;
  for (const auto& [id, days] : profiles) {
    for (std::size_t i = 0; i + 1 < days.size(); ++i) {
      const auto& today = days[i];
      const auto& next = days[i + 1];
      if (add_days(today.date, 1) != next.date) continue;
      ForecastPair p;
      p.customer_id = id;
      p.target_date = next.date;
      p.input.assign(today.values.begin(), today.values.end());
      const Tensor date = nn::date_one_hot(next.date);
      p.input.insert(p.input.end(), date.storage().begin(), date.storage().end());
      p.target.assign(next.values.begin(), next.values.end());
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

namespace {

Tensor uniform_weights(Rng& rng, std::size_t in, std::size_t out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor w({in, out});
  for (auto& v : w.data()) v = u(rng);
  return w;
}

Tensor stack(const std::vector<ForecastPair>& pairs, std::span<const std::size_t> rows, bool inputs) {
  const std::size_t width = inputs ? kForecastInputWidth : data::kSlotsPerDay;
  Tensor out({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& src = inputs ? pairs[rows[r]].input : pairs[rows[r]].target;
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return out;
}

}  // namespace

Forecaster::Forecaster(ForecasterOptions options) : options_(options) {
  if (options_.hidden == 0) throw ValidationError("forecaster hidden width must be positive");
  if (options_.epochs < 0 || options_.batch_size < 1) throw ValidationError("forecaster epochs/batch size invalid");
  Rng rng = make_rng(derive_seed(options_.seed, "forecaster-init"));
  w1_ = params_.add("hidden.weight", uniform_weights(rng, kForecastInputWidth, options_.hidden));
  b1_ = params_.add("hidden.bias", Tensor({options_.hidden}, 0.0));
  w2_ = params_.add("output.weight", uniform_weights(rng, options_.hidden, data::kSlotsPerDay));
  b2_ = params_.add("output.bias", Tensor({data::kSlotsPerDay}, 0.0));
}

ad::Var Forecaster::forward(const ad::Var& inputs) const {
  const ad::Var hidden = ad::tanh(ad::add(ad::matmul(inputs, w1_), b1_));
  return ad::add(ad::matmul(hidden, w2_), b2_);
}

double Forecaster::train(const std::vector<ForecastPair>& pairs) {
  if (pairs.size() < 2) throw ValidationError("forecaster needs at least 2 consecutive-day pairs, got " + std::to_string(pairs.size()));
  ad::Adam optimizer(options_.adam, params_);
  Rng rng = make_rng(derive_seed(options_.seed, "forecaster-shuffle"));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(options_.batch_size);
  for (int epoch = 1; epoch <= options_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(batch, order.size() - start));
      const ad::Var x = ad::Var::constant(stack(pairs, rows, true));
      const ad::Var y = ad::Var::constant(stack(pairs, rows, false));
      const ad::Var loss = ad::scale(ad::sum_squared_error(forward(x), y), 1.0 / static_cast<double>(y.value().size()));
      if (!std::isfinite(loss.value().item())) {
        throw NumericalError("forecaster training diverged at epoch " + std::to_string(epoch));
      }
      optimizer.step(params_, params_.gradients(ad::backward(loss)));
    }
  }
  return mean_squared_error(pairs);
}

std::vector<double> Forecaster::predict(const std::vector<double>& input) const {
  if (input.size() != kForecastInputWidth) throw ShapeError("forecaster input must have " + std::to_string(kForecastInputWidth) + " values");
  ad::NoGradGuard guard;
  const Tensor out = forward(ad::Var::constant(Tensor({1, kForecastInputWidth}, input))).value();
  return out.storage();
}

double Forecaster::mean_squared_error(const std::vector<ForecastPair>& pairs) const {
  if (pairs.empty()) throw ValidationError("forecast evaluation needs at least one pair");
  ad::NoGradGuard guard;
  double total = 0.0;
  std::vector<std::size_t> rows(pairs.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const std::span<const std::size_t> part(rows.data() + start, std::min(chunk, rows.size() - start));
    const ad::Var pred = forward(ad::Var::constant(stack(pairs, part, true)));
    total += ad::sum_squared_error(pred, ad::Var::constant(stack(pairs, part, false))).value().item();
  }
  return total / static_cast<double>(pairs.size() * data::kSlotsPerDay);
}

double Forecaster::rmse(const std::vector<ForecastPair>& pairs) const { return std::sqrt(mean_squared_error(pairs)); }

}  // namespace loadsynth::eval
