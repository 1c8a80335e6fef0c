#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loadsynth/adam.hpp"
#include "loadsynth/data.hpp"

namespace loadsynth::eval {

// Input: the previous day's 48 readings followed by the target date's
// one-hot month/weekday block. Target: the next day's 48 readings.
struct ForecastPair {
  std::string customer_id;
  Date target_date;
  std::vector<double> input;
  std::vector<double> target;
};

inline constexpr std::size_t kForecastInputWidth = data::kSlotsPerDay + 19;

// (day d -> day d + 1) for every pair of calendar-consecutive profiles of the
// same customer id. Replica streams (distinct ids) never pair with each other.
std::vector<ForecastPair> make_forecast_pairs(const data::ProfileMap& profiles);

struct ForecasterOptions {
  std::size_t hidden = 64;
  int epochs = 100;
  int batch_size = 16;
  ad::AdamOptions adam{};
  std::uint64_t seed = 0;
};

// One tanh hidden layer, linear output; trained on the per-entry mean squared error.
class Forecaster {
 public:
  explicit Forecaster(ForecasterOptions options = {});

  // Returns the mean training loss over `pairs` with the final parameters.
  double train(const std::vector<ForecastPair>& pairs);

  std::vector<double> predict(const std::vector<double>& input) const;
  // Mean squared error per entry over the pairs.
  double mean_squared_error(const std::vector<ForecastPair>& pairs) const;
  double rmse(const std::vector<ForecastPair>& pairs) const;
  // Higher is better: the negative RMSE.
  double performance(const std::vector<ForecastPair>& pairs) const { return -rmse(pairs); }

  const ForecasterOptions& options() const { return options_; }

 private:
  ad::Var forward(const ad::Var& inputs) const;

  ForecasterOptions options_;
  ad::ParameterSet params_;
  ad::Var w1_, b1_, w2_, b2_;
};

}  // namespace loadsynth::eval
