#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "loadsynth/config.hpp"
#include "loadsynth/data.hpp"
#include "loadsynth/estimator.hpp"
#include "loadsynth/schedule.hpp"

namespace loadsynth {

// File layout (all integers little-endian):
//   8 bytes  magic "LPDCKPT\0"
//   u32      format version
//   u64      header length n
//   n bytes  JSON header (sorted keys): config, schedule, stats, typical
//            loads, partition dates, tensor table (name, shape, offset)
//   payload  float32 values of every tensor, row-major, in table order
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
  friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

struct PartitionDates {
  std::vector<Date> train, validation, test;
  friend bool operator==(const PartitionDates&, const PartitionDates&) = default;
};

struct ModelCheckpoint {
  RunConfig config;
  int steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<TensorRecord> tensors;
  data::StatsMap stats;
  std::map<std::string, std::vector<double>> typical_loads;
  std::map<std::string, PartitionDates> partitions;

  diffusion::NoiseSchedule schedule() const;
  friend bool operator==(const ModelCheckpoint&, const ModelCheckpoint&) = default;
};

// Parameters are rounded to float32 here.
std::vector<TensorRecord> snapshot_parameters(const ad::ParameterSet& params);

// A network with the checkpoint's architecture and stored weights.
nn::NoiseEstimator build_model(const ModelCheckpoint& checkpoint);

std::string serialize_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace loadsynth
