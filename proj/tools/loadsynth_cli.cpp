#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "loadsynth/errors.hpp"
#include "loadsynth/workflows.hpp"

namespace fs = std::filesystem;
using namespace loadsynth;

namespace {

struct Shared {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--config", s.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", s.seed, "master seed (overrides the config)");
  cmd->add_option("--out", s.out, "output directory")->capture_default_str();
}

RunConfig base_config(const Shared& s) {
  RunConfig c = s.config_path.empty() ? RunConfig{} : load_config(s.config_path);
  if (s.seed) c.seed = *s.seed;
  return c;
}

// Overrides a config field when the flag was given on the command line.
template <class T, class U>
void override_if(const CLI::Option* opt, T& field, const U& value) {
  if (opt->count() > 0) field = value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional diffusion synthesis of daily load profiles"};
  app.require_subcommand(1);
  Shared shared;

  // train
  auto* train = app.add_subcommand("train", "train a model; writes model.ckpt and training_log.csv");
  add_shared(train, shared);
  std::string input;
  std::size_t customers = 0, days = 0;
  int epochs = 0, batch = 0, steps = 0;
  double lr = 0;
  std::size_t d_model = 0, layers = 0, heads = 0;
  std::vector<std::string> only;
  auto* o_input = train->add_option("--input", input, "half-hourly CSV (customer_id,timestamp,kwh)");
  auto* o_synth = train->add_flag("--synthetic", "train on the built-in parametric corpus");
  auto* o_customers = train->add_option("--customers", customers, "synthetic corpus size");
  auto* o_days = train->add_option("--days", days, "synthetic corpus days per customer");
  auto* o_epochs = train->add_option("--epochs", epochs);
  auto* o_batch = train->add_option("--batch-size", batch);
  auto* o_lr = train->add_option("--learning-rate", lr);
  auto* o_steps = train->add_option("--steps", steps, "diffusion steps T");
  auto* o_d = train->add_option("--d-model", d_model);
  auto* o_layers = train->add_option("--layers", layers, "residual layers N");
  auto* o_heads = train->add_option("--heads", heads);
  auto* o_no_attn = train->add_flag("--no-attention", "recurrent layer instead of self-attention");
  auto* o_no_skip = train->add_flag("--no-skip", "output head reads only the last layer");
  auto* o_only = train->add_option("--customer", only, "restrict to these customer ids");

  // synthesize
  auto* synth = app.add_subcommand("synthesize", "synthesize profiles for one customer over a date range");
  add_shared(synth, shared);
  std::string ckpt_path, customer, start, end, condition_file;
  synth->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  synth->add_option("--customer", customer)->required();
  synth->add_option("--start", start, "first date, YYYY-MM-DD")->required();
  synth->add_option("--end", end, "last date (default: start)");
  synth->add_option("--condition-file", condition_file, "history CSV for a customer outside the checkpoint")
      ->check(CLI::ExistingFile);

  // augment
  auto* aug = app.add_subcommand("augment", "synthesize factor replicas of every partition day");
  add_shared(aug, shared);
  std::size_t factor = 0;
  std::string split = "train";
  aug->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  auto* o_factor = aug->add_option("--factor", factor, "replicas per day (default: config)");
  aug->add_option("--split", split, "train, validation or train+validation")->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "compare synthetic or augmented data with real data");
  add_shared(evaluate, shared);
  std::string real_csv, synthetic_csv, mode = "generation";
  int forecaster_epochs = 0;
  evaluate->add_option("--real", real_csv)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--synthetic", synthetic_csv, "synthetic or augmented CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--mode", mode, "generation or augmentation")->capture_default_str();
  auto* o_fe = evaluate->add_option("--forecaster-epochs", forecaster_epochs);

  // gen-corpus
  auto* corpus = app.add_subcommand("gen-corpus", "write the parametric synthetic corpus as CSV");
  add_shared(corpus, shared);
  auto* o_cc = corpus->add_option("--customers", customers);
  auto* o_cd = corpus->add_option("--days", days);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      RunConfig c = base_config(shared);
      override_if(o_input, c.input, input);
      override_if(o_synth, c.synthetic, true);
      override_if(o_customers, c.synthetic_customers, customers);
      override_if(o_days, c.synthetic_days, days);
      override_if(o_epochs, c.epochs, epochs);
      override_if(o_batch, c.batch_size, batch);
      override_if(o_lr, c.learning_rate, lr);
      override_if(o_steps, c.steps, steps);
      override_if(o_d, c.d_model, d_model);
      override_if(o_layers, c.n_layers, layers);
      override_if(o_heads, c.n_heads, heads);
      override_if(o_no_attn, c.use_attention, false);
      override_if(o_no_skip, c.use_skip_connections, false);
      override_if(o_only, c.customers, only);
      const TrainPaths p = cmd_train(c, shared.out, &std::cerr);
      std::cerr << "wrote " << p.checkpoint.string() << " and " << p.log.string() << '\n';
    } else if (synth->parsed()) {
      const Date first = parse_date(start);
      const Date last = end.empty() ? first : parse_date(end);
      std::optional<fs::path> cond;
      if (!condition_file.empty()) cond = condition_file;
      const fs::path out = fs::path(shared.out) / "synthetic.csv";
      cmd_synthesize(ckpt_path, customer, first, last, shared.seed, cond, out);
      std::cerr << "wrote " << out.string() << '\n';
    } else if (aug->parsed()) {
      std::size_t f = factor;
      if (o_factor->count() == 0) f = load_checkpoint(ckpt_path).config.augmentation_factor;
      cmd_augment(ckpt_path, f, parse_augment_split(split), shared.seed, shared.out);
      std::cerr << "wrote augmented.csv and centroids.csv to " << shared.out << '\n';
    } else if (evaluate->parsed()) {
      RunConfig c = base_config(shared);
      override_if(o_fe, c.forecaster_epochs, forecaster_epochs);
      cmd_evaluate(c, real_csv, synthetic_csv, mode, shared.out);
      std::cerr << "wrote metrics.csv and metrics.json to " << shared.out << '\n';
    } else if (corpus->parsed()) {
      RunConfig c = base_config(shared);
      override_if(o_cc, c.synthetic_customers, customers);
      override_if(o_cd, c.synthetic_days, days);
      std::cerr << "wrote " << cmd_gen_corpus(c, shared.out).string() << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
