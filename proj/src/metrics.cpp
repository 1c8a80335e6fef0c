#include "loadsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "loadsynth/errors.hpp"
#include "loadsynth/rng.hpp"

namespace loadsynth::eval {

namespace {

void check_paired(const ProfileSet& a, const ProfileSet& b, const char* what) {
  if (a.empty()) throw ValidationError(std::string(what) + ": empty profile set");
  if (a.size() != b.size()) {
    throw ValidationError(std::string(what) + ": unpaired sets (" + std::to_string(a.size()) + " real vs " +
                          std::to_string(b.size()) + " synthetic profiles)");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw ShapeError(std::string(what) + ": profile length mismatch at index " + std::to_string(i));
  }
}

std::size_t reading_count(const ProfileSet& s) {
  std::size_t n = 0;
  for (const auto& p : s) n += p.size();
  return n;
}

}  // namespace

ProfileSet to_set(std::span<const data::DailyProfile> profiles) {
  ProfileSet out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) out.emplace_back(p.values.begin(), p.values.end());
  return out;
}

double rmse(const ProfileSet& real, const ProfileSet& synthetic) {
  check_paired(real, synthetic, "rmse");
  double sq = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i)
    for (std::size_t j = 0; j < real[i].size(); ++j) sq += (real[i][j] - synthetic[i][j]) * (real[i][j] - synthetic[i][j]);
  return std::sqrt(sq / static_cast<double>(reading_count(real)));
}

double mae(const ProfileSet& real, const ProfileSet& synthetic) {
  check_paired(real, synthetic, "mae");
  double abs = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i)
    for (std::size_t j = 0; j < real[i].size(); ++j) abs += std::abs(real[i][j] - synthetic[i][j]);
  return abs / static_cast<double>(reading_count(real));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("profile length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double gaussian_kernel(std::span<const double> a, std::span<const double> b, double bandwidth) {
  return std::exp(-squared_distance(a, b) / (2.0 * bandwidth * bandwidth));
}

double median_bandwidth(const ProfileSet& a, const ProfileSet& b) {
  std::vector<const std::vector<double>*> pooled;
  for (const auto& p : a) pooled.push_back(&p);
  for (const auto& p : b) pooled.push_back(&p);
  std::vector<double> d;
  d.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j) d.push_back(std::sqrt(squared_distance(*pooled[i], *pooled[j])));
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) median = 0.5 * (median + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  return median > 0.0 ? median : 1.0;
}

double mmd(const ProfileSet& real, const ProfileSet& synthetic, double bandwidth) {
  if (real.empty() || synthetic.empty()) throw ValidationError("mmd: empty profile set");
  if (real.size() != synthetic.size()) throw ValidationError("mmd: sets must have equal size");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ValidationError("mmd: bandwidth must be positive");
  const std::size_t m = real.size();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      total += gaussian_kernel(real[i], real[j], bandwidth) + gaussian_kernel(synthetic[i], synthetic[j], bandwidth) -
               2.0 * gaussian_kernel(real[i], synthetic[j], bandwidth);
    }
  }
  return total / static_cast<double>(m * m);
}

MmdResult mmd(const ProfileSet& real, const ProfileSet& synthetic, std::optional<double> bandwidth, std::uint64_t seed) {
  if (real.empty() || synthetic.empty()) throw ValidationError("mmd: empty profile set");
  const std::size_t m = std::min(real.size(), synthetic.size());
  auto equalize = [&](const ProfileSet& s, std::string_view stream) {
    if (s.size() == m) return s;
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = make_rng(derive_seed(seed, stream));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    ProfileSet out;
    out.reserve(m);
    for (std::size_t i : idx) out.push_back(s[i]);
    return out;
  };
  const ProfileSet a = equalize(real, "mmd-real");
  const ProfileSet b = equalize(synthetic, "mmd-synthetic");
  MmdResult r;
  r.m = m;
  r.bandwidth = bandwidth ? *bandwidth : median_bandwidth(a, b);
  r.value = mmd(a, b, r.bandwidth);
  return r;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("wasserstein_1d: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  // Sweep the merged support; between consecutive points both CDFs are constant.
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double total = 0.0;
  double prev = std::min(x.front(), y.front());
  while (i < x.size() || j < y.size()) {
    const double next = j == y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
    const double fx = static_cast<double>(i) / nx, fy = static_cast<double>(j) / ny;
    if (fx != fy) total += std::abs(fx - fy) * (next - prev);
    prev = next;
    while (i < x.size() && x[i] == next) ++i;
    while (j < y.size() && y[j] == next) ++j;
  }
  return total;
}

double wasserstein_1d(const ProfileSet& real, const ProfileSet& synthetic) {
  std::vector<double> a, b;
  for (const auto& p : real) a.insert(a.end(), p.begin(), p.end());
  for (const auto& p : synthetic) b.insert(b.end(), p.begin(), p.end());
  return wasserstein_1d(a, b);
}

void export_reduction_csv(const ProfileSet& real, const ProfileSet& synthetic, const std::filesystem::path& path) {
  if (real.empty() || synthetic.empty()) throw ValidationError("reduction export needs non-empty real and synthetic sets");
  const std::size_t width = real.front().size();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label";
  for (std::size_t s = 0; s < width; ++s) out << ",v" << s;
  out << '\n';
  char buf[32];
  auto rows = [&](const ProfileSet& set, const char* label) {
    for (const auto& p : set) {
      if (p.size() != width) throw ShapeError("reduction export: profile length mismatch");
      out << label;
      for (double v : p) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
      }
      out << '\n';
    }
  };
  rows(real, "real");
  rows(synthetic, "synthetic");
  if (!out) throw std::runtime_error("error writing " + path.string());
}

LabelledProfiles read_reduction_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) throw ValidationError(path.string() + ": missing header");
  LabelledProfiles out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string label, cell;
    std::getline(row, label, ',');
    std::vector<double> values;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (label == "real") {
      out.real.push_back(std::move(values));
    } else if (label == "synthetic") {
      out.synthetic.push_back(std::move(values));
    } else {
      throw ValidationError(path.string() + ": unknown label '" + label + "' at line " + std::to_string(line_no));
    }
  }
  return out;
}

}  // namespace loadsynth::eval
