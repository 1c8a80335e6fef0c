#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "loadsynth/checkpoint.hpp"
#include "loadsynth/errors.hpp"
#include "loadsynth/evaluation.hpp"
#include "loadsynth/workflows.hpp"

using namespace loadsynth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("loadsynth_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& leaf) const { return path / leaf; }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(int epochs = 2) {
  RunConfig c;
  c.synthetic = true;
  c.synthetic_customers = 2;
  c.synthetic_days = 20;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.epochs = epochs;
  c.seed = 5;
  return c;
}

const TrainingRun& small_run() {
  static const TrainingRun run = [] {
    const RunConfig c = small_config();
    return run_training(c, load_profiles(c));
  }();
  return run;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LOADSYNTH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("run config defaults") {
  const RunConfig c;
  CHECK(c.steps == 50);
  CHECK(c.beta_start == 0.0001);
  CHECK(c.beta_end == 0.5);
  CHECK(c.d_model == 16);
  CHECK(c.n_layers == 6);
  CHECK(c.epochs == 200);
  CHECK(c.batch_size == 16);
  CHECK(c.learning_rate == 0.001);
  CHECK(c.use_attention);
  CHECK(c.use_skip_connections);
  CHECK(c.estimator().channels == c.d_model);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("run config JSON") {
  RunConfig c = small_config();
  c.customers = {"C000", "C001"};
  c.seed = 18446744073709551615ull;
  c.use_attention = false;
  CHECK(config_from_json(config_to_json(c)) == c);

  const RunConfig partial = config_from_json(R"({"epochs": 7, "use_skip_connections": false})");
  CHECK(partial.epochs == 7);
  CHECK_FALSE(partial.use_skip_connections);
  CHECK(partial.steps == 50);

  CHECK_THROWS_AS(config_from_json(R"({"epoch": 7})"), ValidationError);
  CHECK_THROWS_AS(config_from_json(R"({"epochs": "7"})"), ValidationError);
  CHECK_THROWS_AS(config_from_json(R"({"epochs": 1.5})"), ValidationError);
  CHECK_THROWS_AS(config_from_json(R"({"d_model": -4})"), ValidationError);
  CHECK_THROWS_AS(config_from_json(R"({"customers": "C000"})"), ValidationError);
  CHECK_THROWS_AS(config_from_json("[1, 2]"), ValidationError);
  CHECK_THROWS_AS(config_from_json("{"), ValidationError);
}

TEST_CASE("run config validation") {
  auto invalid = [](auto mutate) {
    RunConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ValidationError);
  };
  invalid([](RunConfig& c) { c.steps = 1; });
  invalid([](RunConfig& c) { c.beta_start = 0.6; });
  invalid([](RunConfig& c) { c.beta_end = 1.0; });
  invalid([](RunConfig& c) { c.epochs = -1; });
  invalid([](RunConfig& c) { c.batch_size = 0; });
  invalid([](RunConfig& c) { c.learning_rate = 0.0; });
  invalid([](RunConfig& c) { c.n_heads = 3; });
  invalid([](RunConfig& c) { c.split_test = 0.3; });
  invalid([](RunConfig& c) { c.augmentation_factor = 0; });
  invalid([](RunConfig& c) {
    c.synthetic = true;
    c.input = "x.csv";
  });
  invalid([](RunConfig& c) {
    c.synthetic = true;
    c.synthetic_customers = 1;
  });
}

TEST_CASE("checkpoint round trip") {
  const ModelCheckpoint& ckpt = small_run().checkpoint;
  CHECK(ckpt.stats.size() == 2);
  CHECK(ckpt.typical_loads.at("C000").size() == 48);
  CHECK(ckpt.partitions.at("C001").train.size() == 12);
  CHECK(ckpt.partitions.at("C001").validation.size() == 4);
  CHECK(ckpt.partitions.at("C001").test.size() == 4);

  const std::string bytes = serialize_checkpoint(ckpt);
  CHECK(bytes.compare(0, 8, std::string("LPDCKPT\0", 8)) == 0);
  const ModelCheckpoint back = deserialize_checkpoint(bytes);
  CHECK(back == ckpt);
  CHECK(serialize_checkpoint(back) == bytes);

  TempDir dir("ckpt");
  save_checkpoint(ckpt, dir / "a.ckpt");
  save_checkpoint(load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));

  SUBCASE("payload is float32 of the parameters") {
    const nn::NoiseEstimator model = build_model(ckpt);
    const auto items = model.parameters().items();
    REQUIRE(items.size() == ckpt.tensors.size());
    std::size_t floats = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      CHECK(items[i].name == ckpt.tensors[i].name);
      const auto v = items[i].var.value().data();
      for (std::size_t k = 0; k < v.size(); ++k) CHECK(v[k] == static_cast<double>(ckpt.tensors[i].values[k]));
      floats += v.size();
    }
    CHECK(bytes.size() >= 4 * floats + 20);
    CHECK(snapshot_parameters(model.parameters()) == ckpt.tensors);
  }
  SUBCASE("version mismatch is a hard error") {
    std::string bad = bytes;
    bad[8] = 2;
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(bad), doctest::Contains("version 2"), ValidationError);
  }
  SUBCASE("corrupt files are rejected") {
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(magic), ValidationError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 4)), ValidationError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes + "abcd"), ValidationError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, 30)), ValidationError);
    ModelCheckpoint other = ckpt;
    other.config.n_layers = 2;
    CHECK_THROWS_AS(build_model(other), ValidationError);
  }
}

TEST_CASE("training workflow") {
  SUBCASE("zero epochs keeps the initialization") {
    const RunConfig c = small_config(0);
    const TrainingRun run = run_training(c, load_profiles(c));
    CHECK(run.epoch_losses.empty());
    const nn::NoiseEstimator fresh(c.estimator(), init_seed(c.seed));
    CHECK(snapshot_parameters(fresh.parameters()) == run.checkpoint.tensors);
  }
  SUBCASE("files, log and determinism") {
    TempDir dir("train");
    const RunConfig c = small_config();
    const TrainPaths a = cmd_train(c, dir / "a");
    const TrainPaths b = cmd_train(c, dir / "b");
    CHECK(slurp(a.checkpoint) == slurp(b.checkpoint));
    CHECK(slurp(a.checkpoint) == serialize_checkpoint(small_run().checkpoint));
    CHECK(count_lines(a.log) == 3);
    CHECK(slurp(a.log).rfind("epoch,mean_loss\n1,", 0) == 0);

    RunConfig other = c;
    other.seed = 6;
    CHECK(slurp(cmd_train(other, dir / "c").checkpoint) != slurp(a.checkpoint));
  }
  SUBCASE("customer filter") {
    RunConfig c = small_config(0);
    c.customers = {"C001"};
    CHECK(run_training(c, load_profiles(c)).checkpoint.stats.size() == 1);
    c.customers = {"nobody"};
    CHECK_THROWS_AS(load_profiles(c), ValidationError);
  }
  SUBCASE("invalid config fails before any work") {
    RunConfig c = small_config();
    c.batch_size = 0;
    CHECK_THROWS_AS(cmd_train(c, fs::temp_directory_path() / "loadsynth_cli_never"), ValidationError);
    CHECK_FALSE(fs::exists(fs::temp_directory_path() / "loadsynth_cli_never"));
  }
}

TEST_CASE("synthesize workflow") {
  TempDir dir("synth");
  save_checkpoint(small_run().checkpoint, dir / "m.ckpt");
  const Date first = parse_date("2013-02-01"), last = parse_date("2013-02-07");
  cmd_synthesize(dir / "m.ckpt", "C000", first, last, 3, std::nullopt, dir / "a.csv");
  cmd_synthesize(dir / "m.ckpt", "C000", first, last, 3, std::nullopt, dir / "b.csv");
  cmd_synthesize(dir / "m.ckpt", "C000", first, last, 4, std::nullopt, dir / "c.csv");
  CHECK(count_lines(dir / "a.csv") == 7 * 48 + 1);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));

  const data::IngestResult back = data::ingest_csv(dir / "a.csv");
  CHECK(back.dropped.empty());
  REQUIRE(back.profiles.at("C000").size() == 7);
  for (const auto& p : back.profiles.at("C000"))
    for (double v : p.values) CHECK(v >= 0.0);

  CHECK_THROWS_AS(cmd_synthesize(dir / "m.ckpt", "X9", first, last, 3, std::nullopt, dir / "d.csv"), ValidationError);
  CHECK_THROWS_AS(cmd_synthesize(dir / "m.ckpt", "C000", last, first, 3, std::nullopt, dir / "d.csv"), ValidationError);

  // A customer outside the checkpoint, conditioned on a few days of its own history.
  data::ProfileMap history;
  const data::ProfileMap donor = data::generate_synthetic_corpus(2, 20, 99);
  for (auto p : donor.at("C001")) {
    p.customer_id = "X9";
    history["X9"].push_back(p);
  }
  data::write_profiles_csv(dir / "history.csv", history);
  cmd_synthesize(dir / "m.ckpt", "X9", first, first, 3, dir / "history.csv", dir / "x.csv");
  CHECK(count_lines(dir / "x.csv") == 49);
  CHECK_THROWS_AS(cmd_synthesize(dir / "m.ckpt", "X8", first, first, 3, dir / "history.csv", dir / "x.csv"),
                  ValidationError);
}

TEST_CASE("augment workflow") {
  const ModelCheckpoint& ckpt = small_run().checkpoint;
  const nn::NoiseEstimator model = build_model(ckpt);
  CHECK_THROWS_AS(augment(ckpt, model, 0, AugmentSplit::train, 1), ValidationError);
  CHECK_THROWS_AS(parse_augment_split("test"), ValidationError);

  const Augmentation one = augment(ckpt, model, 1, AugmentSplit::train, 1);
  CHECK(data::profile_count(one.replicas) == 24);
  CHECK(one.replicas.count("C000#1") == 1);

  const Augmentation three = augment(ckpt, model, 3, AugmentSplit::validation, 1);
  CHECK(data::profile_count(three.replicas) == 3 * 8);
  CHECK(data::profile_count(three.centroids) == 8);
  CHECK(three.replicas.at("C000#1")[0].values != three.replicas.at("C000#2")[0].values);
  CHECK(three.replicas.at("C000#1")[0].date == ckpt.partitions.at("C000").validation[0]);

  TempDir dir("augment");
  save_checkpoint(ckpt, dir / "m.ckpt");
  cmd_augment(dir / "m.ckpt", 3, AugmentSplit::train_validation, 2, dir / "out");
  const data::ProfileMap reps = data::ingest_csv(dir / "out" / "augmented.csv").profiles;
  const data::ProfileMap cents = data::ingest_csv(dir / "out" / "centroids.csv").profiles;
  CHECK(data::profile_count(reps) == 3 * 32);
  CHECK(data::profile_count(cents) == 32);
  for (const auto& [id, days] : cents) {
    for (std::size_t d = 0; d < days.size(); ++d) {
      for (std::size_t s = 0; s < 48; ++s) {
        double mean = 0.0;
        for (std::size_t k = 1; k <= 3; ++k) mean += reps.at(id + "#" + std::to_string(k))[d].values[s];
        CHECK(std::abs(days[d].values[s] - mean / 3.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("evaluate workflow") {
  TempDir dir("evaluate");
  const data::ProfileMap corpus = data::generate_synthetic_corpus(2, 40, 3);
  data::write_profiles_csv(dir / "real.csv", corpus);
  RunConfig c;
  c.forecaster_epochs = 3;

  const eval::MetricsReport self = cmd_evaluate(c, dir / "real.csv", dir / "real.csv", "generation", dir / "gen");
  REQUIRE(self.generation.size() == 2);
  for (const auto& row : self.generation) {
    CHECK(row.rmse == 0.0);
    CHECK(row.mae == 0.0);
    CHECK(row.mmd == 0.0);
    CHECK(row.wd == 0.0);
  }
  CHECK(eval::report_from_json(slurp(dir / "gen" / "metrics.json")) == self);
  std::ifstream csv(dir / "gen" / "metrics.csv");
  eval::MetricsReport parsed = eval::read_report_csv(csv);
  parsed.seed = self.seed;
  CHECK(parsed == self);
  CHECK(slurp(dir / "gen" / "metrics.csv").find("\naggregate,") != std::string::npos);

  CHECK_THROWS_AS(cmd_evaluate(c, dir / "real.csv", dir / "real.csv", "augmentation", dir / "aug"), ValidationError);
  CHECK_THROWS_AS(cmd_evaluate(c, dir / "real.csv", dir / "real.csv", "other", dir / "aug"), ValidationError);

  data::write_profiles_csv(dir / "copies.csv", eval::copy_augment(corpus, 2));
  const eval::MetricsReport aug = cmd_evaluate(c, dir / "real.csv", dir / "copies.csv", "augmentation", dir / "aug");
  REQUIRE(aug.augmentation);
  CHECK(aug.augmentation_rows.size() == 2);
  CHECK(eval::report_from_json(slurp(dir / "aug" / "metrics.json")) == aug);
}

TEST_CASE("gen-corpus output is re-ingestible") {
  TempDir dir("corpus");
  RunConfig c;
  c.synthetic_customers = 3;
  c.synthetic_days = 25;
  const fs::path p = cmd_gen_corpus(c, dir.path);
  const data::IngestResult r = data::ingest_csv(p);
  CHECK(r.dropped.empty());
  CHECK(r.profiles.size() == 3);
  CHECK(data::profile_count(r.profiles) == 75);
  c.synthetic = true;
  const data::ProfileMap direct = load_profiles(c);
  for (const auto& [id, days] : direct)
    for (std::size_t d = 0; d < days.size(); ++d) CHECK(r.profiles.at(id)[d].values == days[d].values);
}

TEST_CASE("command-line exit codes") {
  TempDir dir("exit");
  const std::string out = " --out " + dir.path.string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("train --bogus") == 1);
  CHECK(run_cli("gen-corpus --customers 2 --days 20 --seed 3" + out) == 0);
  CHECK(fs::exists(dir / "corpus.csv"));
  CHECK(run_cli("gen-corpus --customers 1" + out) == 1);
  CHECK(run_cli("train --synthetic --customers 2 --days 20 --epochs 1 --d-model 8 --layers 1 --heads 2 --batch-size 0" +
                out) == 1);
  CHECK(run_cli("train --input " + (dir / "corpus.csv").string() +
                " --epochs 1 --d-model 8 --layers 1 --heads 2 --seed 3" + out) == 0);
  CHECK(fs::exists(dir / "model.ckpt"));
  const std::string ck = " --checkpoint " + (dir / "model.ckpt").string();
  CHECK(run_cli("synthesize" + ck + " --customer C000 --start 2013-01-05 --end 2013-01-06" + out) == 0);
  CHECK(count_lines(dir / "synthetic.csv") == 97);
  CHECK(run_cli("synthesize" + ck + " --customer nobody --start 2013-01-05" + out) == 1);
  CHECK(run_cli("synthesize" + ck + " --customer C000 --start 2013-02-30" + out) == 1);
  CHECK(run_cli("augment" + ck + " --factor 0" + out) == 1);
  CHECK(run_cli("augment" + ck + " --factor 2 --split validation" + out) == 0);
  CHECK(count_lines(dir / "augmented.csv") == 2 * 2 * 4 * 48 + 1);
  CHECK(run_cli("evaluate --real " + (dir / "corpus.csv").string() + " --synthetic " + (dir / "synthetic.csv").string() +
                out) == 0);
  CHECK(fs::exists(dir / "metrics.json"));
  // Output directory cannot be created: a runtime failure, not a validation error.
  CHECK(run_cli("gen-corpus --customers 2 --days 20 --out /dev/null/sub") == 2);
}
