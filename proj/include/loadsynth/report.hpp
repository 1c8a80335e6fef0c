#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace loadsynth::eval {

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation across customers; 0 for one customer
  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

MetricSummary summarize(const std::vector<double>& values);

struct GenerationRow {
  std::string customer_id;
  std::size_t n_pairs = 0;
  double rmse = 0.0;  // kW
  double mae = 0.0;   // kW
  double mmd = 0.0;
  double wd = 0.0;
  double bandwidth = 0.0;  // kernel bandwidth used for this customer's MMD
  friend bool operator==(const GenerationRow&, const GenerationRow&) = default;
};

struct AugmentationRow {
  std::string customer_id;
  std::size_t n_val_pairs = 0;
  std::size_t n_val_augmented_pairs = 0;
  double performance_val = 0.0;            // negative RMSE on D_val
  double performance_val_augmented = 0.0;  // negative RMSE on D'_val
  double affinity = 0.0;
  friend bool operator==(const AugmentationRow&, const AugmentationRow&) = default;
};

struct AugmentationSummary {
  double affinity = 0.0;
  double diversity = 0.0;           // final training loss on D'_train
  double diversity_original = 0.0;  // same forecaster setup on D_train
  double improvement_percent = 0.0;
  double test_rmse_original = 0.0;
  double test_rmse_augmented = 0.0;
  double performance_val = 0.0;
  double performance_val_augmented = 0.0;
  std::size_t n_train_pairs = 0;
  std::size_t n_train_augmented_pairs = 0;
  std::size_t n_test_pairs = 0;
  friend bool operator==(const AugmentationSummary&, const AugmentationSummary&) = default;
};

struct MetricsReport {
  std::string mode;  // "generation" or "augmentation"
  std::uint64_t seed = 0;
  std::vector<GenerationRow> generation;
  std::optional<MetricSummary> rmse, mae, mmd, wd;
  std::vector<AugmentationRow> augmentation_rows;
  std::optional<MetricSummary> affinity;
  std::optional<AugmentationSummary> augmentation;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// One row per customer plus an `aggregate` row carrying mean and std columns.
void write_report_csv(std::ostream& out, const MetricsReport& report);
// Rows and aggregates only; the augmentation summary lives in the JSON form.
MetricsReport read_report_csv(std::istream& in);

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

// Writes <dir>/metrics.csv and <dir>/metrics.json.
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace loadsynth::eval
