#include "loadsynth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "loadsynth/errors.hpp"
#include "loadsynth/metrics.hpp"

namespace loadsynth::eval {

std::string replica_id(const std::string& customer, std::size_t k) { return customer + "#" + std::to_string(k); }

std::string_view base_customer(std::string_view id) { return id.substr(0, id.find('#')); }

data::ProfileMap copy_augment(const data::ProfileMap& profiles, std::size_t factor) {
  if (factor < 1) throw ValidationError("augmentation factor must be at least 1");
  data::ProfileMap out;
  for (const auto& [id, days] : profiles) {
    for (std::size_t k = 1; k <= factor; ++k) {
      auto& copy = out[replica_id(id, k)];
      for (auto p : days) {
        p.customer_id = replica_id(id, k);
        copy.push_back(p);
      }
    }
  }
  return out;
}

data::ProfileMap noise_augment(const data::ProfileMap& profiles, const data::StatsMap& stats, std::size_t factor,
                               std::uint64_t seed) {
  if (factor < 1) throw ValidationError("augmentation factor must be at least 1");
  data::ProfileMap out;
  for (const auto& [id, days] : profiles) {
    const auto st = stats.find(std::string(base_customer(id)));
    if (st == stats.end()) throw ValidationError("no normalization statistics for customer '" + id + "'");
    Rng rng = make_rng(derive_seed(seed, "noise-augment:" + id));
    std::normal_distribution<double> normal(st->second.mean, st->second.std);
    for (std::size_t k = 1; k <= factor; ++k) {
      auto& stream = out[replica_id(id, k)];
      for (const auto& day : days) {
        data::DailyProfile p{replica_id(id, k), day.date, {}};
        for (auto& v : p.values) v = std::max(0.0, normal(rng));
        stream.push_back(p);
      }
    }
  }
  return out;
}

data::ProfileMap merge_profiles(const data::ProfileMap& a, const data::ProfileMap& b) {
  data::ProfileMap out = a;
  for (const auto& [id, days] : b) {
    auto& target = out[id];
    std::set<Date> seen;
    for (const auto& p : target) seen.insert(p.date);
    for (const auto& p : days) {
      if (!seen.insert(p.date).second) {
        throw ValidationError("duplicate profile for '" + id + "' on " + format_date(p.date));
      }
      target.push_back(p);
    }
    std::sort(target.begin(), target.end(), [](const auto& x, const auto& y) { return x.date < y.date; });
  }
  return out;
}

data::ProfileMap select_matching(const data::ProfileMap& replicas, const data::ProfileMap& reference) {
  std::map<std::string, std::set<Date>, std::less<>> dates;
  for (const auto& [id, days] : reference)
    for (const auto& p : days) dates[id].insert(p.date);
  data::ProfileMap out;
  for (const auto& [id, days] : replicas) {
    const auto it = dates.find(base_customer(id));
    if (it == dates.end()) continue;
    for (const auto& p : days)
      if (it->second.count(p.date)) out[id].push_back(p);
  }
  return out;
}

MetricsReport evaluate_generation(const data::ProfileMap& real, const data::ProfileMap& synthetic, std::uint64_t seed) {
  if (synthetic.empty()) throw ValidationError("generation evaluation needs at least one synthetic profile");
  std::map<std::string, std::map<Date, const data::DailyProfile*>, std::less<>> index;
  for (const auto& [id, days] : real)
    for (const auto& p : days) index[id][p.date] = &p;

  std::map<std::string, std::pair<ProfileSet, ProfileSet>> grouped;  // base customer -> (real, synthetic)
  for (const auto& [id, days] : synthetic) {
    const std::string base(base_customer(id));
    const auto cust = index.find(base);
    for (const auto& p : days) {
      const data::DailyProfile* match = nullptr;
      if (cust != index.end()) {
        const auto it = cust->second.find(p.date);
        if (it != cust->second.end()) match = it->second;
      }
      if (!match) {
        throw ValidationError("synthetic profile for '" + id + "' on " + format_date(p.date) +
                              " has no real profile with the same customer and date");
      }
      auto& [r, s] = grouped[base];
      r.emplace_back(match->values.begin(), match->values.end());
      s.emplace_back(p.values.begin(), p.values.end());
    }
  }

  MetricsReport report;
  report.mode = "generation";
  report.seed = seed;
  std::vector<double> rmses, maes, mmds, wds;
  for (const auto& [id, sets] : grouped) {
    const auto& [r, s] = sets;
    GenerationRow row;
    row.customer_id = id;
    row.n_pairs = r.size();
    row.rmse = rmse(r, s);
    row.mae = mae(r, s);
    const MmdResult m = mmd(r, s, std::nullopt, derive_seed(seed, id));
    row.mmd = m.value;
    row.bandwidth = m.bandwidth;
    row.wd = wasserstein_1d(r, s);
    rmses.push_back(row.rmse);
    maes.push_back(row.mae);
    mmds.push_back(row.mmd);
    wds.push_back(row.wd);
    report.generation.push_back(row);
  }
  report.rmse = summarize(rmses);
  report.mae = summarize(maes);
  report.mmd = summarize(mmds);
  report.wd = summarize(wds);
  return report;
}

namespace {

std::vector<ForecastPair> pairs_of(const std::vector<ForecastPair>& all, std::string_view customer) {
  std::vector<ForecastPair> out;
  for (const auto& p : all)
    if (base_customer(p.customer_id) == customer) out.push_back(p);
  return out;
}

}  // namespace

MetricsReport evaluate_augmentation(const AugmentationData& d, const ForecasterOptions& options) {
  if (d.train.empty() || d.validation.empty()) {
    throw ValidationError("augmentation evaluation needs training and validation partitions");
  }
  const auto train_pairs = make_forecast_pairs(d.train);
  const auto val_pairs = make_forecast_pairs(d.validation);
  const auto test_pairs = make_forecast_pairs(d.test);
  const auto train_aug_pairs = make_forecast_pairs(merge_profiles(d.train, d.train_replicas));
  const auto val_aug_pairs = make_forecast_pairs(merge_profiles(d.validation, d.validation_replicas));
  if (val_pairs.empty()) throw ValidationError("validation partition has no consecutive-day pairs");

  Forecaster original(options);
  AugmentationSummary s;
  s.diversity_original = original.train(train_pairs);
  Forecaster augmented(options);
  s.diversity = augmented.train(train_aug_pairs);

  s.performance_val = original.performance(val_pairs);
  s.performance_val_augmented = original.performance(val_aug_pairs);
  s.affinity = s.performance_val_augmented - s.performance_val;
  if (!test_pairs.empty()) {
    s.test_rmse_original = original.rmse(test_pairs);
    s.test_rmse_augmented = augmented.rmse(test_pairs);
    s.improvement_percent = 100.0 * (s.test_rmse_original - s.test_rmse_augmented) / s.test_rmse_original;
  }
  s.n_train_pairs = train_pairs.size();
  s.n_train_augmented_pairs = train_aug_pairs.size();
  s.n_test_pairs = test_pairs.size();

  MetricsReport report;
  report.mode = "augmentation";
  report.seed = options.seed;
  std::vector<double> affinities;
  for (const auto& [id, days] : d.validation) {
    const auto v = pairs_of(val_pairs, id);
    const auto va = pairs_of(val_aug_pairs, id);
    if (v.empty() || va.empty()) continue;
    AugmentationRow row{id, v.size(), va.size(), original.performance(v), original.performance(va), 0.0};
    row.affinity = row.performance_val_augmented - row.performance_val;
    affinities.push_back(row.affinity);
    report.augmentation_rows.push_back(row);
  }
  report.affinity = summarize(affinities);
  report.augmentation = s;
  return report;
}

AugmentationData augmentation_data(const data::DatasetSplit& split, const data::ProfileMap& replicas) {
  AugmentationData d;
  for (const auto& [id, cs] : split.customers) {
    if (!cs.train.empty()) d.train[id] = cs.train;
    if (!cs.validation.empty()) d.validation[id] = cs.validation;
    if (!cs.test.empty()) d.test[id] = cs.test;
  }
  data::ProfileMap originals;
  for (const auto& [id, days] : replicas)
    if (base_customer(id) == id) originals[id] = days;
  if (!originals.empty()) {
    throw ValidationError("augmented file contains un-suffixed customer '" + originals.begin()->first +
                          "'; expected replica ids of the form <customer>#<k>");
  }
  d.train_replicas = select_matching(replicas, d.train);
  d.validation_replicas = select_matching(replicas, d.validation);
  return d;
}

}  // namespace loadsynth::eval
