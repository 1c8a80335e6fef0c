#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "loadsynth/date.hpp"
#include "loadsynth/errors.hpp"
#include "loadsynth/rng.hpp"

namespace loadsynth::data {

inline constexpr std::size_t kSlotsPerDay = 48;
using DayValues = std::array<double, kSlotsPerDay>;

struct DailyProfile {
  std::string customer_id;
  Date date;
  DayValues values{};
};

// Customer id -> chronologically ordered profiles.
using ProfileMap = std::map<std::string, std::vector<DailyProfile>>;

std::size_t profile_count(const ProfileMap& profiles);

// ---- CSV ingestion ---------------------------------------------------------

struct DropRecord {
  std::string customer_id;
  Date date;
  std::string reason;
};

struct IngestResult {
  ProfileMap profiles;
  std::vector<DropRecord> dropped;
  std::size_t readings_read = 0;
  std::size_t readings_dropped = 0;
};

// Thrown with every offending (1-based) line number collected.
class CsvParseError : public ValidationError {
 public:
  CsvParseError(const std::string& what, std::vector<std::size_t> lines)
      : ValidationError(what), lines_(std::move(lines)) {}
  const std::vector<std::size_t>& lines() const { return lines_; }

 private:
  std::vector<std::size_t> lines_;
};

// Header `customer_id,timestamp,kwh`; timestamps `YYYY-MM-DD[T ]HH:MM[:SS]`
// on the half hour, with an optional `Z` / `+HH:MM` suffix that is ignored
// (wall-clock order). Days missing any of the 48 slots are dropped.
IngestResult ingest_csv(std::istream& in);
IngestResult ingest_csv(const std::filesystem::path& path);

std::string format_timestamp(Date date, std::size_t slot);
// Data rows only, no header.
void write_profile_rows(std::ostream& out, std::span<const DailyProfile> profiles);
void write_profiles_csv(std::ostream& out, const ProfileMap& profiles);
void write_profiles_csv(const std::filesystem::path& path, const ProfileMap& profiles);
void write_drop_report(std::ostream& out, std::span<const DropRecord> dropped);

// ---- splitting -------------------------------------------------------------

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct CustomerSplit {
  std::vector<DailyProfile> train;
  std::vector<DailyProfile> validation;
  std::vector<DailyProfile> test;
};

struct DatasetSplit {
  std::map<std::string, CustomerSplit> customers;
  // Customers with fewer than kMinSplitDays profiles.
  std::vector<std::string> excluded;
};

inline constexpr std::size_t kMinSplitDays = 5;

// Chronological per customer (train, then validation, then test). Sizes are
// floor(ratio * n) plus largest-remainder rounding, so each is within one day
// of its share; ties favour training.
DatasetSplit split_dataset(const ProfileMap& profiles, SplitRatios ratios = {});

// ---- normalization ---------------------------------------------------------

struct NormalizationStats {
  double mean = 0.0;
  double std = 1.0;
  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};
using StatsMap = std::map<std::string, NormalizationStats>;

inline constexpr double kMinStd = 1e-6;

// Population mean/std over every reading; std is floored at kMinStd with a warning on stderr.
NormalizationStats compute_stats(std::span<const DailyProfile> training_days);
StatsMap compute_stats(const DatasetSplit& split);

std::vector<double> normalize(std::span<const double> values, const NormalizationStats& stats);
std::vector<double> denormalize(std::span<const double> values, const NormalizationStats& stats);

// ---- conditions ------------------------------------------------------------

struct Condition {
  std::vector<double> typical_load;  // kSlotsPerDay normalized values
  Date date;
};

// Elementwise mean of the normalized training days.
std::vector<double> typical_load(std::span<const DailyProfile> training_days, const NormalizationStats& stats);

Condition build_condition(const DatasetSplit& split, const StatsMap& stats, const std::string& customer, Date date);

// Entry point for customers without history: the caller supplies a typical
// load (for instance a population mean or a donor customer's).
Condition make_condition(std::vector<double> typical_load, Date date);

// ---- synthetic corpus ------------------------------------------------------

// Parametric daily shape: scale * season * week * (base + two Gaussian bumps),
// times mean-one log-normal noise per day and per reading.
struct CustomerShape {
  double scale = 1.0;
  double base = 0.3;
  double morning_amplitude = 0.6;
  double morning_hour = 7.5;
  double morning_width = 1.0;
  double evening_amplitude = 1.2;
  double evening_hour = 19.0;
  double evening_width = 1.5;
  double weekend_factor = 1.1;
  double seasonal_amplitude = 0.25;
  double day_noise = 0.1;
  double reading_noise = 0.15;
};

struct Range {
  double lo;
  double hi;
};

struct ShapeRanges {
  Range scale{0.5, 2.0};
  Range base{0.15, 0.5};
  Range morning_amplitude{0.3, 1.2};
  Range morning_hour{6.0, 9.5};
  Range morning_width{0.7, 1.5};
  Range evening_amplitude{0.6, 2.0};
  Range evening_hour{17.0, 21.0};
  Range evening_width{1.0, 2.5};
  Range weekend_factor{0.8, 1.3};
  Range seasonal_amplitude{0.15, 0.35};
};

CustomerShape draw_customer_shape(Rng& rng, const ShapeRanges& ranges = {});

// Noise-free mean of a shape on a given date.
DayValues expected_profile(const CustomerShape& shape, Date date);

inline constexpr Date kDefaultCorpusStart{std::chrono::year{2013}, std::chrono::January, std::chrono::day{1}};

std::string synthetic_customer_id(std::size_t index);

ProfileMap corpus_from_shapes(std::span<const CustomerShape> shapes, std::size_t n_days, std::uint64_t seed,
                              Date start = kDefaultCorpusStart);
std::vector<CustomerShape> corpus_shapes(std::size_t n_customers, std::uint64_t seed);

// Requires n_customers >= 2 and n_days >= 20.
ProfileMap generate_synthetic_corpus(std::size_t n_customers, std::size_t n_days, std::uint64_t seed,
                                     Date start = kDefaultCorpusStart);

}  // namespace loadsynth::data
