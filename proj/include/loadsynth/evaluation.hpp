#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "loadsynth/data.hpp"
#include "loadsynth/forecaster.hpp"
#include "loadsynth/report.hpp"

namespace loadsynth::eval {

// Augmented copies live under ids "<customer>#<k>", k = 1..factor, so every
// replica is its own day-ordered stream and stays re-ingestible.
std::string replica_id(const std::string& customer, std::size_t k);
std::string_view base_customer(std::string_view id);

// Exact copies of every profile (the no-new-information baseline).
data::ProfileMap copy_augment(const data::ProfileMap& profiles, std::size_t factor);
// Pure-noise profiles: every reading drawn from N(mean, std) of the customer's
// stats, clipped at 0 so the result is a valid load profile.
data::ProfileMap noise_augment(const data::ProfileMap& profiles, const data::StatsMap& stats, std::size_t factor,
                               std::uint64_t seed);

// Union of two maps; a repeated (id, date) is an error.
data::ProfileMap merge_profiles(const data::ProfileMap& a, const data::ProfileMap& b);
// Profiles whose base customer and date appear in `reference`.
data::ProfileMap select_matching(const data::ProfileMap& replicas, const data::ProfileMap& reference);

// Pairs every synthetic profile with the real profile of the same base
// customer and date; an unmatched synthetic profile is an error.
MetricsReport evaluate_generation(const data::ProfileMap& real, const data::ProfileMap& synthetic, std::uint64_t seed);

struct AugmentationData {
  data::ProfileMap train, validation, test;  // original splits
  data::ProfileMap train_replicas;           // augmentation of the training days
  data::ProfileMap validation_replicas;      // augmentation of the validation days
};

// D'_train = train + train_replicas, D'_val = validation + validation_replicas.
// Affinity = M(g, D'_val) - M(g, D_val) with g trained on D_train;
// Diversity = final training loss of a forecaster trained on D'_train;
// Improvement = percent test-RMSE reduction of that forecaster over g.
MetricsReport evaluate_augmentation(const AugmentationData& data, const ForecasterOptions& options);

// Sorts replicas of a real dataset into training and validation augmentation by date.
AugmentationData augmentation_data(const data::DatasetSplit& split, const data::ProfileMap& replicas);

}  // namespace loadsynth::eval
