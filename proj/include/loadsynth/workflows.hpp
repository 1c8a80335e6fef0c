#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "loadsynth/checkpoint.hpp"
#include "loadsynth/config.hpp"
#include "loadsynth/data.hpp"
#include "loadsynth/report.hpp"

namespace loadsynth {

// Sub-seeds of the master seed. Data generation, initialization, training
// noise and sampling each get their own stream.
std::uint64_t data_seed(std::uint64_t seed);
std::uint64_t init_seed(std::uint64_t seed);
std::uint64_t training_seed(std::uint64_t seed);
std::uint64_t synthesis_seed(std::uint64_t seed, const std::string& customer, Date date);
std::uint64_t augmentation_seed(std::uint64_t seed, const std::string& customer, Date date, std::size_t k);

// Synthetic corpus or the ingested input CSV, restricted to config.customers.
data::ProfileMap load_profiles(const RunConfig& config, std::ostream* log = nullptr);

struct TrainingRun {
  ModelCheckpoint checkpoint;
  std::vector<double> epoch_losses;
};

TrainingRun run_training(const RunConfig& config, const data::ProfileMap& profiles, std::ostream* log = nullptr);

void write_training_log(const std::filesystem::path& path, const std::vector<double>& epoch_losses);

// Condition for a customer outside the checkpoint: a few days of its own
// history in the ingestion schema. Typical load and statistics come from them.
struct ExternalCondition {
  std::vector<double> typical_load;
  data::NormalizationStats stats;
};
ExternalCondition condition_from_history(const data::ProfileMap& history, const std::string& customer);

// One profile per date in [first, last], in kW.
std::vector<data::DailyProfile> synthesize_range(const ModelCheckpoint& checkpoint, const nn::NoiseEstimator& model,
                                                 const std::string& customer, Date first, Date last, std::uint64_t seed,
                                                 const std::optional<ExternalCondition>& external = std::nullopt);

enum class AugmentSplit { train, validation, train_validation };
AugmentSplit parse_augment_split(const std::string& name);

struct Augmentation {
  data::ProfileMap replicas;   // ids "<customer>#<k>"
  data::ProfileMap centroids;  // per (customer, date), mean over the k replicas
};

// `factor` synthesized profiles for every partition day, each from its own sub-seed.
Augmentation augment(const ModelCheckpoint& checkpoint, const nn::NoiseEstimator& model, std::size_t factor,
                     AugmentSplit split, std::uint64_t seed);

// ---- command entry points (files in, files out) ----------------------------

struct TrainPaths {
  std::filesystem::path checkpoint, log;
};
TrainPaths cmd_train(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream* log = nullptr);

void cmd_synthesize(const std::filesystem::path& checkpoint, const std::string& customer, Date first, Date last,
                    std::optional<std::uint64_t> seed, const std::optional<std::filesystem::path>& condition_file,
                    const std::filesystem::path& out_csv);

void cmd_augment(const std::filesystem::path& checkpoint, std::size_t factor, AugmentSplit split,
                 std::optional<std::uint64_t> seed, const std::filesystem::path& out_dir);

eval::MetricsReport cmd_evaluate(const RunConfig& config, const std::filesystem::path& real_csv,
                                 const std::filesystem::path& synthetic_csv, const std::string& mode,
                                 const std::filesystem::path& out_dir);

std::filesystem::path cmd_gen_corpus(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace loadsynth
