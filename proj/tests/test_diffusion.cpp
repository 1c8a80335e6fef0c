#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "loadsynth/diffusion.hpp"
#include "loadsynth/errors.hpp"
#include "loadsynth/rng.hpp"

using namespace loadsynth;
using namespace loadsynth::diffusion;

namespace {

constexpr std::size_t L = data::kSlotsPerDay;

// Returns a fixed tensor regardless of input.
class FixedModel : public NoiseModel {
 public:
  explicit FixedModel(Tensor out) : out_(std::move(out)) {}
  ad::Var estimate(const ad::Var&, int, const Condition&) const override {
    ++calls;
    return ad::Var::constant(out_);
  }
  mutable int calls = 0;

 private:
  Tensor out_;
};

// eps_hat = w * xt + b with scalar w, b.
class AffineModel : public TrainableNoiseModel {
 public:
  AffineModel() {
    w_ = params_.add("w", Tensor::matrix(1, 1, {0.0}));
    b_ = params_.add("b", Tensor::vector({0.0}));
  }
  ad::Var estimate(const ad::Var& xt, int, const Condition&) const override {
    const std::size_t n = xt.shape()[0];
    return ad::reshape(ad::add(ad::matmul(ad::reshape(xt, {n, 1}), w_), b_), {n});
  }
  ad::ParameterSet& parameters() override { return params_; }

 private:
  ad::ParameterSet params_;
  ad::Var w_, b_;
};

class NanModel : public TrainableNoiseModel {
 public:
  NanModel() { p_ = params_.add("p", Tensor({L}, 1.0)); }
  ad::Var estimate(const ad::Var&, int, const Condition&) const override { return ad::scale(p_, NAN); }
  ad::ParameterSet& parameters() override { return params_; }

 private:
  ad::ParameterSet params_;
  ad::Var p_;
};

Condition flat_condition() { return data::make_condition(std::vector<double>(L, 0.0), parse_date("2013-06-03")); }

std::vector<double> normal_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  fill_normal(rng, v);
  return v;
}

// Noise whose last-step draw can be replaced without touching any other draw.
class ScriptedNoise : public SamplingNoise {
 public:
  ScriptedNoise(std::uint64_t seed, double last_step_value) : inner_(seed), last_(last_step_value) {}
  void initial(std::span<double> out) override { inner_.initial(out); }
  void step(int t, std::span<double> out) override {
    inner_.step(t, out);
    if (t == 1) std::fill(out.begin(), out.end(), last_);
  }

 private:
  SeededNoise inner_;
  double last_;
};

}  // namespace

TEST_CASE("linear schedule endpoints and derived tables") {
  const auto s = build_schedule(50, 0.0001, 0.5);
  CHECK(s.steps() == 50);
  CHECK(s.beta(1) == 0.0001);
  CHECK(s.beta(50) == 0.5);
  CHECK(s.beta(2) == doctest::Approx(0.0001 + 0.4999 / 49).epsilon(1e-14));
  CHECK(std::abs(s.beta(2) - 0.01030204) < 1e-8);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(std::abs(s.alpha_bar(1) - 0.9999) < 1e-15);

  for (int t = 1; t <= 50; ++t) {
    CAPTURE(t);
    CHECK(std::abs(s.alpha(t) + s.beta(t) - 1.0) < 1e-12);
    CHECK(std::abs(s.alpha_bar(t) - s.alpha_bar(t - 1) * s.alpha(t)) < 1e-12);
    const double bt = (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)) * s.beta(t);
    CHECK(std::abs(s.beta_tilde(t) - bt) < 1e-12);
    CHECK(s.beta_tilde(t) <= s.beta(t));
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) < 1.0);
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    if (t > 1) CHECK(s.beta(t) > s.beta(t - 1));
  }
  CHECK(s.beta_tilde(1) == 0.0);
}

TEST_CASE("schedule rejects invalid ranges and timesteps") {
  CHECK_THROWS_AS(build_schedule(1, 0.0001, 0.5), ValidationError);
  CHECK_THROWS_AS(build_schedule(50, 0.0, 0.5), ValidationError);
  CHECK_THROWS_AS(build_schedule(50, 0.5, 0.1), ValidationError);
  CHECK_THROWS_AS(build_schedule(50, 0.1, 1.0), ValidationError);
  CHECK_THROWS_AS(NoiseSchedule::from_betas({0.1, 1.0}), ValidationError);
  const auto s = build_schedule(10, 0.001, 0.2);
  CHECK_THROWS_AS(s.beta(0), std::out_of_range);
  CHECK_THROWS_AS(s.beta(11), std::out_of_range);
  CHECK_THROWS_AS(s.alpha_bar(11), std::out_of_range);
}

TEST_CASE("forward_diffuse closed form") {
  const auto s = build_schedule(50, 0.0001, 0.5);
  Rng rng = make_rng(3);
  const auto x0 = normal_vector(rng, L);
  const auto eps = normal_vector(rng, L);
  const std::vector<double> zeros(L, 0.0);

  const auto no_noise = forward_diffuse(x0, 17, zeros, s);
  const auto no_signal = forward_diffuse(zeros, 17, eps, s);
  const auto both = forward_diffuse(x0, 17, eps, s);
  for (std::size_t i = 0; i < L; ++i) {
    CHECK(no_noise[i] == std::sqrt(s.alpha_bar(17)) * x0[i]);
    CHECK(no_signal[i] == std::sqrt(1.0 - s.alpha_bar(17)) * eps[i]);
    CHECK(both[i] == std::sqrt(s.alpha_bar(17)) * x0[i] + std::sqrt(1.0 - s.alpha_bar(17)) * eps[i]);
  }
  CHECK_THROWS_AS(forward_diffuse(x0, 0, eps, s), std::out_of_range);
  CHECK_THROWS_AS(forward_diffuse(x0, 51, eps, s), std::out_of_range);
  CHECK_THROWS_AS(forward_diffuse(x0, 5, std::vector<double>(3, 0.0), s), ShapeError);
}

TEST_CASE("forward process moments: one-shot and composed single steps agree with the closed form") {
  const auto s = build_schedule(50, 0.0001, 0.5);
  const int n = 20000;
  const double x0 = 1.3;
  for (int t : {1, 8, 30}) {
    CAPTURE(t);
    Rng rng = make_rng(derive_seed(41, static_cast<std::uint64_t>(t)));
    std::normal_distribution<double> z(0.0, 1.0);
    double s1 = 0, s2 = 0, c1 = 0, c2 = 0;
    for (int k = 0; k < n; ++k) {
      const double e = z(rng);
      const double xt = forward_diffuse(std::vector<double>{x0}, t, std::vector<double>{e}, s)[0];
      s1 += xt;
      s2 += xt * xt;
      double x = x0;  // t single steps x_i = sqrt(alpha_i) x_{i-1} + sqrt(beta_i) eps
      for (int i = 1; i <= t; ++i) x = std::sqrt(s.alpha(i)) * x + std::sqrt(s.beta(i)) * z(rng);
      c1 += x;
      c2 += x * x;
    }
    const double mean = std::sqrt(s.alpha_bar(t)) * x0;
    const double var = 1.0 - s.alpha_bar(t);
    const double se_mean = std::sqrt(var / n);
    const double se_var = var * std::sqrt(2.0 / (n - 1));
    for (auto [m1, m2] : {std::pair{s1, s2}, std::pair{c1, c2}}) {
      const double m = m1 / n;
      const double v = (m2 - n * m * m) / (n - 1);
      CHECK(std::abs(m - mean) < 3 * se_mean);
      CHECK(std::abs(v - var) < 3 * se_var);
    }
  }
}

TEST_CASE("training loss") {
  const auto s = build_schedule(50, 0.0001, 0.5);
  Rng rng = make_rng(8);
  const auto x0 = normal_vector(rng, L);
  const auto eps = normal_vector(rng, L);
  const Condition cond = flat_condition();

  SUBCASE("perfect estimator gives zero") {
    FixedModel perfect(Tensor({L}, eps));
    CHECK(training_loss(x0, cond, 9, eps, perfect, s).value().item() == 0.0);
  }
  SUBCASE("zero estimate against a unit residual gives one") {
    std::vector<double> unit(L, 0.0);
    unit[0] = 1.0;
    FixedModel zero(Tensor({L}, 0.0));
    CHECK(training_loss(x0, cond, 9, unit, zero, s).value().item() == 1.0);
  }
  SUBCASE("matches a straight-line recomputation and is non-negative") {
    AffineModel model;
    ad::Var w = model.parameters().get("w"), b = model.parameters().get("b");
    w.mutable_value()[0] = 0.37;
    b.mutable_value()[0] = -0.11;
    for (int t : {1, 25, 50}) {
      const double loss = training_loss(x0, cond, t, eps, model, s).value().item();
      double expect = 0.0;
      for (std::size_t i = 0; i < L; ++i) {
        const double xt = std::sqrt(s.alpha_bar(t)) * x0[i] + std::sqrt(1.0 - s.alpha_bar(t)) * eps[i];
        const double r = eps[i] - (0.37 * xt - 0.11);
        expect += r * r;
      }
      CHECK(loss >= 0.0);
      CHECK(loss == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("reverse step") {
  const auto s = build_schedule(50, 0.0001, 0.5);
  Rng rng = make_rng(12);
  const auto xt = normal_vector(rng, L);
  const auto draw_a = normal_vector(rng, L);
  const auto draw_b = normal_vector(rng, L);
  const Condition cond = flat_condition();
  const auto est = normal_vector(rng, L);
  FixedModel model(Tensor({L}, est));

  SUBCASE("t = 1 returns the mean with no added noise") {
    const auto a = reverse_step(xt, 1, cond, model, s, draw_a);
    const auto b = reverse_step(xt, 1, cond, model, s, draw_b);
    CHECK(a == b);
    CHECK(a == reverse_mean(xt, 1, est, s));
  }
  SUBCASE("t > 1 adds sqrt(beta_tilde) times the draw") {
    const int t = 20;
    const auto out = reverse_step(xt, t, cond, model, s, draw_a);
    const auto mu = reverse_mean(xt, t, est, s);
    for (std::size_t i = 0; i < L; ++i) {
      const double expect_mu = (xt[i] - s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t)) * est[i]) / std::sqrt(s.alpha(t));
      CHECK(mu[i] == doctest::Approx(expect_mu).epsilon(1e-14));
      CHECK(out[i] == doctest::Approx(mu[i] + std::sqrt(s.beta_tilde(t)) * draw_a[i]).epsilon(1e-14));
    }
    CHECK(reverse_step(xt, t, cond, model, s, draw_a) == out);
  }
  SUBCASE("zero estimate scales by 1/sqrt(alpha)") {
    FixedModel zero(Tensor({L}, 0.0));
    const auto out = reverse_step(xt, 1, cond, zero, s, draw_a);
    for (std::size_t i = 0; i < L; ++i) CHECK(out[i] == doctest::Approx(xt[i] / std::sqrt(s.alpha(1))).epsilon(1e-15));
  }
  SUBCASE("out-of-range timestep") {
    CHECK_THROWS_AS(reverse_step(xt, 0, cond, model, s, draw_a), std::out_of_range);
    CHECK_THROWS_AS(reverse_step(xt, 51, cond, model, s, draw_a), std::out_of_range);
    CHECK(model.calls == 0);
  }
}

TEST_CASE("degenerate schedule: beta = 1e-12 leaves data and mean untouched") {
  const auto s = NoiseSchedule::from_betas(std::vector<double>(3, 1e-12));
  Rng rng = make_rng(77);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> x0(L), eps(L), est(L);
  for (std::size_t i = 0; i < L; ++i) x0[i] = 4 * u(rng), eps[i] = u(rng), est[i] = u(rng);
  const Condition cond = flat_condition();
  FixedModel model(Tensor({L}, est));
  for (int t = 1; t <= 3; ++t) {
    const auto xt = forward_diffuse(x0, t, eps, s);
    const auto mu = reverse_mean(x0, t, est, s);
    for (std::size_t i = 0; i < L; ++i) {
      CHECK(std::abs(xt[i] - x0[i]) < 1e-6);
      CHECK(std::abs(mu[i] - x0[i]) < 1e-6);
    }
  }
}

TEST_CASE("sampling") {
  const auto s = build_schedule(10, 0.0001, 0.5);
  Rng rng = make_rng(5);
  FixedModel model(Tensor({L}, normal_vector(rng, L)));
  const Condition cond = flat_condition();

  CHECK(sample(model, s, cond, 42) == sample(model, s, cond, 42));
  CHECK(sample(model, s, cond, 42) != sample(model, s, cond, 43));

  SUBCASE("the final step ignores its noise draw") {
    ScriptedNoise a(9, 0.0), b(9, 123.0);
    CHECK(sample(model, s, cond, a) == sample(model, s, cond, b));
  }
  SUBCASE("earlier draws do matter") {
    class Perturbed : public SamplingNoise {
     public:
      void initial(std::span<double> out) override { inner.initial(out); }
      void step(int t, std::span<double> out) override {
        inner.step(t, out);
        if (t == 2) out[0] += 1.0;
      }
      SeededNoise inner{9};
    } perturbed;
    SeededNoise plain(9);
    CHECK(sample(model, s, cond, perturbed) != sample(model, s, cond, plain));
  }
  SUBCASE("synthesize denormalizes the sample") {
    const data::NormalizationStats stats{2.0, 0.5};
    const auto raw = sample(model, s, cond, 7);
    const auto kw = synthesize(cond, model, s, 7, stats);
    for (std::size_t i = 0; i < L; ++i) CHECK(kw[i] == doctest::Approx(raw[i] * 0.5 + 2.0).epsilon(1e-15));
  }
}

// E[eps | x_t] when every reading of x0 is N(mu, sd^2): the Bayes-optimal estimator.
class GaussianPosteriorModel : public NoiseModel {
 public:
  GaussianPosteriorModel(const NoiseSchedule& s, double mu, double sd) : s_(s), mu_(mu), sd_(sd) {}
  ad::Var estimate(const ad::Var& xt, int t, const Condition&) const override {
    const double ab = s_.alpha_bar(t);
    Tensor out = xt.value();
    for (auto& v : out.data()) v = std::sqrt(1 - ab) * (v - std::sqrt(ab) * mu_) / (ab * sd_ * sd_ + 1 - ab);
    return ad::Var::constant(out);
  }

 private:
  const NoiseSchedule& s_;
  double mu_, sd_;
};

TEST_CASE("sampling with the optimal estimator for Gaussian data recovers that distribution") {
  // Fine schedules reproduce N(mu, sd^2); the coarse T = 50 chain keeps the mean
  // but under-disperses, a discretization effect of the reverse process itself.
  struct Case {
    int steps;
    double beta_end, min_sd_ratio;
  };
  for (const Case c : {Case{200, 0.05, 0.93}, Case{50, 0.5, 0.7}}) {
    const auto s = build_schedule(c.steps, 0.0001, c.beta_end);
    for (const auto& [mu, sd] : {std::pair{0.0, 1.0}, std::pair{0.5, 0.2}}) {
      CAPTURE(c.steps);
      CAPTURE(mu);
      GaussianPosteriorModel model(s, mu, sd);
      double sum = 0, sq = 0;
      std::size_t n = 0;
      for (std::uint64_t k = 0; k < 200; ++k) {
        for (double v : sample(model, s, flat_condition(), k)) {
          sum += v;
          sq += v * v;
          ++n;
        }
      }
      const double mean = sum / n, spread = std::sqrt(sq / n - mean * mean);
      CHECK(std::abs(mean - mu) < 4 * sd / std::sqrt(static_cast<double>(n)));
      CHECK(spread / sd > c.min_sd_ratio);
      CHECK(spread / sd < 1.03);
    }
  }
}

TEST_CASE("training loop") {
  const auto s = build_schedule(50, 0.0001, 0.5);
  Rng rng = make_rng(21);
  std::vector<TrainingExample> examples;
  for (int k = 0; k < 10; ++k) examples.push_back({normal_vector(rng, L), flat_condition()});

  SUBCASE("zero epochs leave the model untouched") {
    AffineModel model;
    TrainOptions opts;
    opts.epochs = 0;
    CHECK(train(model, s, examples, opts).empty());
    CHECK(model.parameters().get("w").value()[0] == 0.0);
  }
  SUBCASE("history has one finite entry per epoch and is seed-deterministic") {
    auto run = [&] {
      AffineModel model;
      TrainOptions opts;
      opts.epochs = 5;
      opts.batch_size = 4;
      opts.seed = 3;
      int calls = 0;
      opts.on_epoch = [&](int epoch, double loss) {
        CHECK(epoch == ++calls);
        CHECK(std::isfinite(loss));
      };
      auto h = train(model, s, examples, opts);
      CHECK(calls == 5);
      return std::make_pair(h, model.parameters().get("w").value());
    };
    const auto a = run(), b = run();
    CHECK(a.first.size() == 5);
    CHECK(a == b);
  }
  SUBCASE("invalid inputs") {
    AffineModel model;
    TrainOptions opts;
    CHECK_THROWS_AS(train(model, s, std::span<const TrainingExample>{}, opts), ValidationError);
    opts.batch_size = 0;
    CHECK_THROWS_AS(train(model, s, examples, opts), ValidationError);
  }
  SUBCASE("non-finite loss aborts with context") {
    NanModel model;
    TrainOptions opts;
    opts.epochs = 2;
    try {
      train(model, s, examples, opts);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("epoch 1, batch 1") != std::string::npos);
    }
  }
}
