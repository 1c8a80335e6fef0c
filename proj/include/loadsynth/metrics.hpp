#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "loadsynth/data.hpp"

namespace loadsynth::eval {

// A set of equal-length profiles (one row per profile).
using ProfileSet = std::vector<std::vector<double>>;

ProfileSet to_set(std::span<const data::DailyProfile> profiles);

// Over all paired readings; sets must match in count and length.
double rmse(const ProfileSet& real, const ProfileSet& synthetic);
double mae(const ProfileSet& real, const ProfileSet& synthetic);

double squared_distance(std::span<const double> a, std::span<const double> b);
double gaussian_kernel(std::span<const double> a, std::span<const double> b, double bandwidth);

// Median Euclidean distance over all pairs of the pooled sets; 1 if that median is 0.
double median_bandwidth(const ProfileSet& a, const ProfileSet& b);

// Biased V-statistic (1/M^2) sum_ij [k(y_i, y_j) + k(s_i, s_j) - 2 k(y_i, s_j)]
// for equal-size sets, accumulated term by term so mmd(X, X) is exactly 0.
double mmd(const ProfileSet& real, const ProfileSet& synthetic, double bandwidth);

struct MmdResult {
  double value = 0.0;
  double bandwidth = 0.0;
  std::size_t m = 0;  // set size after equalization
};

// Subsamples the larger set without replacement (seeded) to the smaller size;
// the bandwidth defaults to the median heuristic on the equalized sets.
MmdResult mmd(const ProfileSet& real, const ProfileSet& synthetic, std::optional<double> bandwidth, std::uint64_t seed);

// Exact W1 between the empirical distributions of two samples (integral of |F1 - F2|).
double wasserstein_1d(std::span<const double> a, std::span<const double> b);
// Pools every reading of each set into one sample first.
double wasserstein_1d(const ProfileSet& real, const ProfileSet& synthetic);

// Header `label,v0,...,v47`; label is `real` or `synthetic`.
void export_reduction_csv(const ProfileSet& real, const ProfileSet& synthetic, const std::filesystem::path& path);

struct LabelledProfiles {
  ProfileSet real;
  ProfileSet synthetic;
};
LabelledProfiles read_reduction_csv(const std::filesystem::path& path);

}  // namespace loadsynth::eval
