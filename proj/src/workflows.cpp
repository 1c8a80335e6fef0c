#include "loadsynth/workflows.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "loadsynth/diffusion.hpp"
#include "loadsynth/errors.hpp"
#include "loadsynth/evaluation.hpp"

namespace loadsynth {

std::uint64_t data_seed(std::uint64_t seed) { return derive_seed(seed, "data"); }
std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, "init"); }
std::uint64_t training_seed(std::uint64_t seed) { return derive_seed(seed, "training"); }

std::uint64_t synthesis_seed(std::uint64_t seed, const std::string& customer, Date date) {
  return derive_seed(derive_seed(seed, "synthesize"), customer + "@" + format_date(date));
}

std::uint64_t augmentation_seed(std::uint64_t seed, const std::string& customer, Date date, std::size_t k) {
  return derive_seed(derive_seed(derive_seed(seed, "augment"), customer + "@" + format_date(date)), k);
}

data::ProfileMap load_profiles(const RunConfig& config, std::ostream* log) {
  data::ProfileMap all;
  if (config.synthetic) {
    all = data::generate_synthetic_corpus(config.synthetic_customers, config.synthetic_days, data_seed(config.seed));
  } else {
    if (config.input.empty()) throw ValidationError("no input: give an input CSV or use the synthetic corpus");
    data::IngestResult r = data::ingest_csv(std::filesystem::path(config.input));
    if (log && !r.dropped.empty()) {
      *log << "dropped " << r.dropped.size() << " incomplete days (" << r.readings_dropped << " readings)\n";
    }
    all = std::move(r.profiles);
  }
  if (config.customers.empty()) return all;
  data::ProfileMap selected;
  for (const auto& id : config.customers) {
    const auto it = all.find(id);
    if (it == all.end()) throw ValidationError("customer '" + id + "' not found in the input");
    selected[id] = it->second;
  }
  return selected;
}

namespace {

std::vector<Date> dates_of(const std::vector<data::DailyProfile>& days) {
  std::vector<Date> out;
  for (const auto& p : days) out.push_back(p.date);
  return out;
}

}  // namespace

TrainingRun run_training(const RunConfig& config, const data::ProfileMap& profiles, std::ostream* log) {
  config.validate();
  const data::DatasetSplit split = data::split_dataset(profiles, config.split());
  if (log) {
    for (const auto& id : split.excluded) *log << "customer " << id << " has too few days and is skipped\n";
  }
  if (split.customers.empty()) throw ValidationError("no customer has enough days to train on");
  const data::StatsMap stats = data::compute_stats(split);

  TrainingRun run;
  ModelCheckpoint& ckpt = run.checkpoint;
  ckpt.config = config;
  ckpt.steps = config.steps;
  ckpt.beta_start = config.beta_start;
  ckpt.beta_end = config.beta_end;
  ckpt.stats = stats;

  std::vector<diffusion::TrainingExample> examples;
  for (const auto& [id, cs] : split.customers) {
    const auto& st = stats.at(id);
    ckpt.typical_loads[id] = data::typical_load(cs.train, st);
    ckpt.partitions[id] = {dates_of(cs.train), dates_of(cs.validation), dates_of(cs.test)};
    for (const auto& p : cs.train) {
      examples.push_back({data::normalize(p.values, st), data::make_condition(ckpt.typical_loads[id], p.date)});
    }
  }

  const auto schedule = ckpt.schedule();
  nn::NoiseEstimator model(config.estimator(), init_seed(config.seed));
  diffusion::TrainOptions opt;
  opt.epochs = config.epochs;
  opt.batch_size = config.batch_size;
  opt.adam = config.adam();
  opt.seed = training_seed(config.seed);
  if (log) {
    *log << "training on " << examples.size() << " days from " << split.customers.size() << " customers, "
         << model.parameters().scalar_count() << " parameters\n";
    opt.on_epoch = [log](int epoch, double loss) { *log << "epoch " << epoch << " mean_loss " << loss << '\n'; };
  }
  run.epoch_losses = diffusion::train(model, schedule, examples, opt);
  ckpt.tensors = snapshot_parameters(model.parameters());
  return run;
}

void write_training_log(const std::filesystem::path& path, const std::vector<double>& epoch_losses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,mean_loss\n";
  char buf[32];
  for (std::size_t e = 0; e < epoch_losses.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g", epoch_losses[e]);
    out << e + 1 << ',' << buf << '\n';
  }
}

ExternalCondition condition_from_history(const data::ProfileMap& history, const std::string& customer) {
  const auto it = history.find(customer);
  if (it == history.end() || it->second.empty()) {
    throw ValidationError("condition file has no complete day for customer '" + customer + "'");
  }
  ExternalCondition c;
  c.stats = data::compute_stats(it->second);
  c.typical_load = data::typical_load(it->second, c.stats);
  return c;
}

std::vector<data::DailyProfile> synthesize_range(const ModelCheckpoint& ckpt, const nn::NoiseEstimator& model,
                                                 const std::string& customer, Date first, Date last, std::uint64_t seed,
                                                 const std::optional<ExternalCondition>& external) {
  if (last < first) throw ValidationError("date range is empty: " + format_date(first) + " > " + format_date(last));
  std::vector<double> typical;
  data::NormalizationStats stats;
  if (external) {
    typical = external->typical_load;
    stats = external->stats;
  } else {
    const auto t = ckpt.typical_loads.find(customer);
    if (t == ckpt.typical_loads.end()) {
      throw ValidationError("customer '" + customer + "' is not in the checkpoint; supply a condition file");
    }
    typical = t->second;
    stats = ckpt.stats.at(customer);
  }
  const auto schedule = ckpt.schedule();
  std::vector<data::DailyProfile> out;
  for (Date d = first; d <= last; d = add_days(d, 1)) {
    const auto values =
        diffusion::synthesize(data::make_condition(typical, d), model, schedule, synthesis_seed(seed, customer, d), stats);
    data::DailyProfile p{customer, d, {}};
    for (std::size_t s = 0; s < data::kSlotsPerDay; ++s) p.values[s] = std::max(0.0, values[s]);
    out.push_back(p);
  }
  return out;
}

AugmentSplit parse_augment_split(const std::string& name) {
  if (name == "train") return AugmentSplit::train;
  if (name == "validation") return AugmentSplit::validation;
  if (name == "train+validation") return AugmentSplit::train_validation;
  throw ValidationError("unknown split '" + name + "' (expected train, validation or train+validation)");
}

Augmentation augment(const ModelCheckpoint& ckpt, const nn::NoiseEstimator& model, std::size_t factor,
                     AugmentSplit split, std::uint64_t seed) {
  if (factor < 1) throw ValidationError("augmentation factor must be at least 1");
  const auto schedule = ckpt.schedule();
  Augmentation out;
  for (const auto& [id, parts] : ckpt.partitions) {
    std::vector<Date> dates;
    if (split != AugmentSplit::validation) dates = parts.train;
    if (split != AugmentSplit::train) dates.insert(dates.end(), parts.validation.begin(), parts.validation.end());
    const auto& stats = ckpt.stats.at(id);
    const auto& typical = ckpt.typical_loads.at(id);
    for (Date d : dates) {
      const auto condition = data::make_condition(typical, d);
      data::DailyProfile centroid{id, d, {}};
      for (std::size_t k = 1; k <= factor; ++k) {
        const auto values = diffusion::synthesize(condition, model, schedule, augmentation_seed(seed, id, d, k), stats);
        data::DailyProfile p{eval::replica_id(id, k), d, {}};
        for (std::size_t s = 0; s < data::kSlotsPerDay; ++s) {
          p.values[s] = std::max(0.0, values[s]);
          centroid.values[s] += p.values[s];
        }
        out.replicas[p.customer_id].push_back(p);
      }
      for (auto& v : centroid.values) v /= static_cast<double>(factor);
      out.centroids[id].push_back(centroid);
    }
  }
  return out;
}

TrainPaths cmd_train(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream* log) {
  config.validate();
  const data::ProfileMap profiles = load_profiles(config, log);
  const TrainingRun run = run_training(config, profiles, log);
  std::filesystem::create_directories(out_dir);
  TrainPaths paths{out_dir / "model.ckpt", out_dir / "training_log.csv"};
  save_checkpoint(run.checkpoint, paths.checkpoint);
  write_training_log(paths.log, run.epoch_losses);
  return paths;
}

void cmd_synthesize(const std::filesystem::path& checkpoint, const std::string& customer, Date first, Date last,
                    std::optional<std::uint64_t> seed, const std::optional<std::filesystem::path>& condition_file,
                    const std::filesystem::path& out_csv) {
  const ModelCheckpoint ckpt = load_checkpoint(checkpoint);
  std::optional<ExternalCondition> external;
  if (condition_file) external = condition_from_history(data::ingest_csv(*condition_file).profiles, customer);
  const nn::NoiseEstimator model = build_model(ckpt);
  data::ProfileMap out;
  out[customer] = synthesize_range(ckpt, model, customer, first, last, seed.value_or(ckpt.config.seed), external);
  if (out_csv.has_parent_path()) std::filesystem::create_directories(out_csv.parent_path());
  data::write_profiles_csv(out_csv, out);
}

void cmd_augment(const std::filesystem::path& checkpoint, std::size_t factor, AugmentSplit split,
                 std::optional<std::uint64_t> seed, const std::filesystem::path& out_dir) {
  const ModelCheckpoint ckpt = load_checkpoint(checkpoint);
  const nn::NoiseEstimator model = build_model(ckpt);
  const Augmentation a = augment(ckpt, model, factor, split, seed.value_or(ckpt.config.seed));
  std::filesystem::create_directories(out_dir);
  data::write_profiles_csv(out_dir / "augmented.csv", a.replicas);
  data::write_profiles_csv(out_dir / "centroids.csv", a.centroids);
}

eval::MetricsReport cmd_evaluate(const RunConfig& config, const std::filesystem::path& real_csv,
                                 const std::filesystem::path& synthetic_csv, const std::string& mode,
                                 const std::filesystem::path& out_dir) {
  config.validate();
  if (mode != "generation" && mode != "augmentation") {
    throw ValidationError("unknown evaluation mode '" + mode + "' (expected generation or augmentation)");
  }
  const data::ProfileMap real = data::ingest_csv(real_csv).profiles;
  const data::ProfileMap synthetic = data::ingest_csv(synthetic_csv).profiles;
  eval::MetricsReport report;
  if (mode == "generation") {
    report = eval::evaluate_generation(real, synthetic, config.seed);
  } else {
    const data::DatasetSplit split = data::split_dataset(real, config.split());
    const eval::AugmentationData d = eval::augmentation_data(split, synthetic);
    if (d.train.empty() || d.validation.empty()) {
      throw ValidationError("augmentation mode needs real data with training and validation partitions");
    }
    report = eval::evaluate_augmentation(d, config.forecaster());
  }
  eval::write_report(report, out_dir);
  return report;
}

std::filesystem::path cmd_gen_corpus(const RunConfig& config, const std::filesystem::path& out_dir) {
  RunConfig c = config;
  c.synthetic = true;
  c.input.clear();
  c.validate();
  std::filesystem::create_directories(out_dir);
  const auto path = out_dir / "corpus.csv";
  data::write_profiles_csv(path, load_profiles(c));
  return path;
}

}  // namespace loadsynth
