#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <numbers>

#include "loadsynth/data.hpp"

namespace loadsynth::data {

// ---- splitting -------------------------------------------------------------

DatasetSplit split_dataset(const ProfileMap& profiles, SplitRatios ratios) {
  const double total = ratios.train + ratios.validation + ratios.test;
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 || std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("split ratios must be non-negative and sum to 1");
  }
  DatasetSplit split;
  for (const auto& [id, days] : profiles) {
    if (days.size() < kMinSplitDays) {
      std::clog << "warning: customer '" << id << "' has " << days.size() << " days (< " << kMinSplitDays
                << "); excluded from splitting\n";
      split.excluded.push_back(id);
      continue;
    }
    // Largest-remainder apportionment: floor each share, then hand leftover
    // days to the largest fractional parts (ties: train, validation, test).
    const double n = static_cast<double>(days.size());
    const std::array<double, 3> target{ratios.train * n, ratios.validation * n, ratios.test * n};
    std::array<std::size_t, 3> count{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      count[k] = static_cast<std::size_t>(std::floor(target[k] + 1e-9));
      assigned += count[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return target[a] - static_cast<double>(count[a]) > target[b] - static_cast<double>(count[b]) + 1e-9;
    });
    for (std::size_t k = 0; assigned < days.size(); ++k, ++assigned) ++count[order[k % 3]];
    const std::size_t n_train = count[0], n_val = count[1];
    CustomerSplit& cs = split.customers[id];
    cs.train.assign(days.begin(), days.begin() + static_cast<std::ptrdiff_t>(n_train));
    cs.validation.assign(days.begin() + static_cast<std::ptrdiff_t>(n_train),
                         days.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    cs.test.assign(days.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), days.end());
  }
  return split;
}

// ---- normalization ---------------------------------------------------------

NormalizationStats compute_stats(std::span<const DailyProfile> training_days) {
  if (training_days.empty()) throw ValidationError("normalization statistics need at least one training day");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& d : training_days)
    for (double v : d.values) total += v, ++n;
  const double mean = total / static_cast<double>(n);
  double sq = 0.0;
  for (const auto& d : training_days)
    for (double v : d.values) sq += (v - mean) * (v - mean);
  double std = std::sqrt(sq / static_cast<double>(n));
  if (std < kMinStd) {
    std::clog << "warning: customer '" << training_days.front().customer_id << "' has zero-variance training data; std floored at "
              << kMinStd << '\n';
    std = kMinStd;
  }
  return {mean, std};
}

StatsMap compute_stats(const DatasetSplit& split) {
  StatsMap stats;
  for (const auto& [id, cs] : split.customers) {
    if (!cs.train.empty()) stats[id] = compute_stats(cs.train);
  }
  return stats;
}

std::vector<double> normalize(std::span<const double> values, const NormalizationStats& stats) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - stats.mean) / stats.std;
  return out;
}

std::vector<double> denormalize(std::span<const double> values, const NormalizationStats& stats) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * stats.std + stats.mean;
  return out;
}

// ---- conditions ------------------------------------------------------------

std::vector<double> typical_load(std::span<const DailyProfile> training_days, const NormalizationStats& stats) {
  if (training_days.empty()) throw ValidationError("typical load needs at least one training day");
  std::vector<double> mean(kSlotsPerDay, 0.0);
  for (const auto& d : training_days) {
    const auto z = normalize(d.values, stats);
    for (std::size_t s = 0; s < kSlotsPerDay; ++s) mean[s] += z[s];
  }
  for (auto& v : mean) v /= static_cast<double>(training_days.size());
  return mean;
}

Condition build_condition(const DatasetSplit& split, const StatsMap& stats, const std::string& customer, Date date) {
  auto it = split.customers.find(customer);
  auto st = stats.find(customer);
  if (it == split.customers.end() || it->second.train.empty() || st == stats.end()) {
    throw ValidationError("customer '" + customer +
                          "' has no training data; supply an external typical load (e.g. a population or donor "
                          "profile) via a condition file");
  }
  return make_condition(typical_load(it->second.train, st->second), date);
}

Condition make_condition(std::vector<double> typical, Date date) {
  if (typical.size() != kSlotsPerDay) {
    throw ValidationError("typical load must have 48 values, got " + std::to_string(typical.size()));
  }
  for (double v : typical)
    if (!std::isfinite(v)) throw ValidationError("typical load contains a non-finite value");
  if (!date.ok()) throw ValidationError("invalid condition date");
  return {std::move(typical), date};
}

// ---- synthetic corpus ------------------------------------------------------

namespace {

double uniform(Rng& rng, Range r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); }

double bump(double hour, double centre, double width) {
  const double d = (hour - centre) / width;
  return std::exp(-0.5 * d * d);
}

}  // namespace

CustomerShape draw_customer_shape(Rng& rng, const ShapeRanges& r) {
  CustomerShape s;
  s.scale = uniform(rng, r.scale);
  s.base = uniform(rng, r.base);
  s.morning_amplitude = uniform(rng, r.morning_amplitude);
  s.morning_hour = uniform(rng, r.morning_hour);
  s.morning_width = uniform(rng, r.morning_width);
  s.evening_amplitude = uniform(rng, r.evening_amplitude);
  s.evening_hour = uniform(rng, r.evening_hour);
  s.evening_width = uniform(rng, r.evening_width);
  s.weekend_factor = uniform(rng, r.weekend_factor);
  s.seasonal_amplitude = uniform(rng, r.seasonal_amplitude);
  return s;
}

DayValues expected_profile(const CustomerShape& shape, Date date) {
  // Winter peak in mid January.
  const double phase = 2.0 * std::numbers::pi * (static_cast<double>(day_of_year(date)) - 15.0) / 365.25;
  const double season = 1.0 + shape.seasonal_amplitude * std::cos(phase);
  const double week = weekday_index(date) >= 5 ? shape.weekend_factor : 1.0;
  DayValues out{};
  for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
    const double hour = (static_cast<double>(s) + 0.5) / 2.0;
    const double shape_value = shape.base + shape.morning_amplitude * bump(hour, shape.morning_hour, shape.morning_width) +
                               shape.evening_amplitude * bump(hour, shape.evening_hour, shape.evening_width);
    out[s] = shape.scale * season * week * shape_value;
  }
  return out;
}

std::string synthetic_customer_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%03zu", index);
  return buf;
}

ProfileMap corpus_from_shapes(std::span<const CustomerShape> shapes, std::size_t n_days, std::uint64_t seed, Date start) {
  ProfileMap out;
  const std::uint64_t noise_root = derive_seed(seed, "corpus-noise");
  for (std::size_t c = 0; c < shapes.size(); ++c) {
    const CustomerShape& shape = shapes[c];
    const std::string id = synthetic_customer_id(c);
    Rng rng = make_rng(derive_seed(noise_root, c));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto& days = out[id];
    days.reserve(n_days);
    for (std::size_t d = 0; d < n_days; ++d) {
      const Date date = add_days(start, static_cast<int>(d));
      DayValues values = expected_profile(shape, date);
      const double sd = shape.day_noise, sr = shape.reading_noise;
      const double day_factor = std::exp(sd * normal(rng) - 0.5 * sd * sd);
      for (auto& v : values) v *= day_factor * std::exp(sr * normal(rng) - 0.5 * sr * sr);
      days.push_back({id, date, values});
    }
  }
  return out;
}

std::vector<CustomerShape> corpus_shapes(std::size_t n_customers, std::uint64_t seed) {
  const std::uint64_t root = derive_seed(seed, "corpus-shape");
  std::vector<CustomerShape> shapes;
  for (std::size_t c = 0; c < n_customers; ++c) {
    Rng rng = make_rng(derive_seed(root, c));
    shapes.push_back(draw_customer_shape(rng));
  }
  return shapes;
}

ProfileMap generate_synthetic_corpus(std::size_t n_customers, std::size_t n_days, std::uint64_t seed, Date start) {
  if (n_customers < 2) throw ValidationError("synthetic corpus needs at least 2 customers");
  if (n_days < 20) throw ValidationError("synthetic corpus needs at least 20 days");
  const auto shapes = corpus_shapes(n_customers, seed);
  return corpus_from_shapes(shapes, n_days, seed, start);
}

}  // namespace loadsynth::data
