#include "loadsynth/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "loadsynth/errors.hpp"

namespace loadsynth::eval {

using nlohmann::json;

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  if (values.empty()) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream row(line);
  while (std::getline(row, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double to_double(const std::string& s) { return std::stod(s); }
std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

const char* kGenerationHeader = "customer_id,n_pairs,rmse,rmse_std,mae,mae_std,mmd,mmd_std,wd,wd_std,bandwidth";
const char* kAugmentationHeader =
    "customer_id,n_val_pairs,n_val_augmented_pairs,performance_val,performance_val_augmented,affinity,affinity_std";

json summary_json(const std::optional<MetricSummary>& s) {
  if (!s) return nullptr;
  return json{{"mean", s->mean}, {"std", s->std}};
}

std::optional<MetricSummary> summary_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return MetricSummary{j.at("mean").get<double>(), j.at("std").get<double>()};
}

}  // namespace

void write_report_csv(std::ostream& out, const MetricsReport& r) {
  if (r.mode == "generation") {
    out << kGenerationHeader << '\n';
    for (const auto& g : r.generation) {
      out << g.customer_id << ',' << g.n_pairs << ',' << num(g.rmse) << ",," << num(g.mae) << ",," << num(g.mmd) << ",,"
          << num(g.wd) << ",," << num(g.bandwidth) << '\n';
    }
    if (r.rmse && r.mae && r.mmd && r.wd) {
      std::size_t pairs = 0;
      for (const auto& g : r.generation) pairs += g.n_pairs;
      out << "aggregate," << pairs << ',' << num(r.rmse->mean) << ',' << num(r.rmse->std) << ',' << num(r.mae->mean) << ','
          << num(r.mae->std) << ',' << num(r.mmd->mean) << ',' << num(r.mmd->std) << ',' << num(r.wd->mean) << ','
          << num(r.wd->std) << ",\n";
    }
  } else if (r.mode == "augmentation") {
    out << kAugmentationHeader << '\n';
    for (const auto& a : r.augmentation_rows) {
      out << a.customer_id << ',' << a.n_val_pairs << ',' << a.n_val_augmented_pairs << ',' << num(a.performance_val) << ','
          << num(a.performance_val_augmented) << ',' << num(a.affinity) << ",\n";
    }
    if (r.affinity) {
      std::size_t val = 0, aug = 0;
      for (const auto& a : r.augmentation_rows) val += a.n_val_pairs, aug += a.n_val_augmented_pairs;
      out << "aggregate," << val << ',' << aug << ",,," << num(r.affinity->mean) << ',' << num(r.affinity->std) << '\n';
    }
  } else {
    throw ValidationError("unknown report mode '" + r.mode + "'");
  }
}

MetricsReport read_report_csv(std::istream& in) {
  MetricsReport r;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty metrics CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line == kGenerationHeader) {
    r.mode = "generation";
  } else if (line == kAugmentationHeader) {
    r.mode = "augmentation";
  } else {
    throw ValidationError("unrecognized metrics CSV header");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = split_row(line);
    if (r.mode == "generation") {
      if (c.size() != 11) throw ValidationError("metrics CSV row has " + std::to_string(c.size()) + " columns");
      if (c[0] == "aggregate") {
        r.rmse = MetricSummary{to_double(c[2]), to_double(c[3])};
        r.mae = MetricSummary{to_double(c[4]), to_double(c[5])};
        r.mmd = MetricSummary{to_double(c[6]), to_double(c[7])};
        r.wd = MetricSummary{to_double(c[8]), to_double(c[9])};
      } else {
        r.generation.push_back({c[0], to_size(c[1]), to_double(c[2]), to_double(c[4]), to_double(c[6]), to_double(c[8]),
                                to_double(c[10])});
      }
    } else {
      if (c.size() != 7) throw ValidationError("metrics CSV row has " + std::to_string(c.size()) + " columns");
      if (c[0] == "aggregate") {
        r.affinity = MetricSummary{to_double(c[5]), to_double(c[6])};
      } else {
        r.augmentation_rows.push_back(
            {c[0], to_size(c[1]), to_size(c[2]), to_double(c[3]), to_double(c[4]), to_double(c[5])});
      }
    }
  }
  return r;
}

std::string report_to_json(const MetricsReport& r) {
  json j;
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  j["generation"] = json::array();
  for (const auto& g : r.generation) {
    j["generation"].push_back({{"customer_id", g.customer_id},
                               {"n_pairs", g.n_pairs},
                               {"rmse", g.rmse},
                               {"mae", g.mae},
                               {"mmd", g.mmd},
                               {"wd", g.wd},
                               {"bandwidth", g.bandwidth}});
  }
  j["aggregate"] = {{"rmse", summary_json(r.rmse)},
                    {"mae", summary_json(r.mae)},
                    {"mmd", summary_json(r.mmd)},
                    {"wd", summary_json(r.wd)},
                    {"affinity", summary_json(r.affinity)}};
  j["augmentation_rows"] = json::array();
  for (const auto& a : r.augmentation_rows) {
    j["augmentation_rows"].push_back({{"customer_id", a.customer_id},
                                      {"n_val_pairs", a.n_val_pairs},
                                      {"n_val_augmented_pairs", a.n_val_augmented_pairs},
                                      {"performance_val", a.performance_val},
                                      {"performance_val_augmented", a.performance_val_augmented},
                                      {"affinity", a.affinity}});
  }
  if (r.augmentation) {
    const auto& s = *r.augmentation;
    j["augmentation"] = {{"affinity", s.affinity},
                         {"diversity", s.diversity},
                         {"diversity_original", s.diversity_original},
                         {"improvement_percent", s.improvement_percent},
                         {"test_rmse_original", s.test_rmse_original},
                         {"test_rmse_augmented", s.test_rmse_augmented},
                         {"performance_val", s.performance_val},
                         {"performance_val_augmented", s.performance_val_augmented},
                         {"n_train_pairs", s.n_train_pairs},
                         {"n_train_augmented_pairs", s.n_train_augmented_pairs},
                         {"n_test_pairs", s.n_test_pairs}};
  } else {
    j["augmentation"] = nullptr;
  }
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  MetricsReport r;
  try {
    const json j = json::parse(text);
    r.mode = j.at("mode").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& g : j.at("generation")) {
      r.generation.push_back({g.at("customer_id").get<std::string>(), g.at("n_pairs").get<std::size_t>(),
                              g.at("rmse").get<double>(), g.at("mae").get<double>(), g.at("mmd").get<double>(),
                              g.at("wd").get<double>(), g.at("bandwidth").get<double>()});
    }
    const json& agg = j.at("aggregate");
    r.rmse = summary_from(agg.at("rmse"));
    r.mae = summary_from(agg.at("mae"));
    r.mmd = summary_from(agg.at("mmd"));
    r.wd = summary_from(agg.at("wd"));
    r.affinity = summary_from(agg.at("affinity"));
    for (const auto& a : j.at("augmentation_rows")) {
      r.augmentation_rows.push_back({a.at("customer_id").get<std::string>(), a.at("n_val_pairs").get<std::size_t>(),
                                     a.at("n_val_augmented_pairs").get<std::size_t>(),
                                     a.at("performance_val").get<double>(),
                                     a.at("performance_val_augmented").get<double>(), a.at("affinity").get<double>()});
    }
    if (!j.at("augmentation").is_null()) {
      const json& s = j.at("augmentation");
      AugmentationSummary a;
      a.affinity = s.at("affinity").get<double>();
      a.diversity = s.at("diversity").get<double>();
      a.diversity_original = s.at("diversity_original").get<double>();
      a.improvement_percent = s.at("improvement_percent").get<double>();
      a.test_rmse_original = s.at("test_rmse_original").get<double>();
      a.test_rmse_augmented = s.at("test_rmse_augmented").get<double>();
      a.performance_val = s.at("performance_val").get<double>();
      a.performance_val_augmented = s.at("performance_val_augmented").get<double>();
      a.n_train_pairs = s.at("n_train_pairs").get<std::size_t>();
      a.n_train_augmented_pairs = s.at("n_train_augmented_pairs").get<std::size_t>();
      a.n_test_pairs = s.at("n_test_pairs").get<std::size_t>();
      r.augmentation = a;
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed metrics JSON: ") + e.what());
  }
  return r;
}

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "metrics.csv");
  std::ofstream js(dir / "metrics.json");
  if (!csv || !js) throw std::runtime_error("cannot write metrics files in " + dir.string());
  write_report_csv(csv, report);
  js << report_to_json(report);
}

}  // namespace loadsynth::eval
