#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loadsynth/adam.hpp"
#include "loadsynth/data.hpp"
#include "loadsynth/estimator.hpp"
#include "loadsynth/forecaster.hpp"

namespace loadsynth {

// Everything a run depends on besides its input files. Defaults are the
// published hyperparameters. Output locations are deliberately not part of
// the config so that identical runs into different directories agree.
struct RunConfig {
  // noise schedule
  int steps = 50;
  double beta_start = 0.0001;
  double beta_end = 0.5;
  // network
  std::size_t d_model = 16;
  std::size_t n_layers = 6;
  std::size_t n_heads = 4;
  bool use_attention = true;
  bool use_skip_connections = true;
  // optimization
  int epochs = 200;
  int batch_size = 16;
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  // data
  std::string input;  // ingestion CSV; empty with synthetic = true
  bool synthetic = false;
  std::size_t synthetic_customers = 4;
  std::size_t synthetic_days = 365;
  std::vector<std::string> customers;  // empty: all
  double split_train = 0.6;
  double split_validation = 0.2;
  double split_test = 0.2;
  // augmentation and evaluation
  std::size_t augmentation_factor = 50;
  int forecaster_epochs = 100;

  void validate() const;

  nn::EstimatorConfig estimator() const;
  ad::AdamOptions adam() const;
  data::SplitRatios split() const;
  eval::ForecasterOptions forecaster() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Compact JSON with sorted keys. Parsing rejects unknown keys and wrong types.
std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace loadsynth
