#include "loadsynth/estimator.hpp"

#include <cmath>
#include <string>

#include "loadsynth/errors.hpp"

namespace loadsynth::nn {

void EstimatorConfig::validate() const {
  if (d_model == 0 || d_model % 2 != 0) throw ValidationError("d_model must be a positive even number");
  if (n_layers < 1) throw ValidationError("at least one residual layer is required");
  if (channels < 1) throw ValidationError("channel width must be positive");
  if (seq_len < 1) throw ValidationError("sequence length must be positive");
  if (use_attention && (n_heads == 0 || d_model % n_heads != 0)) {
    throw ValidationError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                          std::to_string(n_heads) + ")");
  }
}

Tensor embed_timestep(double t, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) throw ValidationError("timestep embedding width must be even");
  if (t < 0) throw ValidationError("timestep must be non-negative");
  Tensor out({d_model});
  for (std::size_t i = 0; i < d_model / 2; ++i) {
    const double freq = std::pow(10.0, 16.0 * static_cast<double>(i) / static_cast<double>(d_model));
    out[2 * i] = std::sin(t * freq);
    out[2 * i + 1] = std::cos(t * freq);
  }
  return out;
}

Tensor positional_encoding(std::size_t length, std::size_t d_model) {
  if (d_model % 2 != 0) throw ValidationError("positional encoding width must be even");
  Tensor out({length, d_model});
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d_model));
      out.at(pos, 2 * i) = std::sin(angle);
      out.at(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return out;
}

Tensor date_one_hot(Date date) {
  if (!date.ok()) throw ValidationError("invalid date");
  Tensor out({kDateEncodingWidth}, 0.0);
  out[month_index(date)] = 1.0;
  out[12 + weekday_index(date)] = 1.0;
  return out;
}

ad::Var linear(const ad::Var& x, const ad::Var& weight, const ad::Var& bias) {
  return ad::add(ad::matmul(x, weight), bias);
}

ad::Var multi_head_self_attention(const ad::Var& x, const AttentionParams& p, std::size_t n_heads,
                                  std::vector<Tensor>* weights_out) {
  const ad::Var q = linear(x, p.wq, p.bq);
  const ad::Var k = linear(x, p.wk, p.bk);
  const ad::Var v = linear(x, p.wv, p.bv);
  const auto qh = ad::split(q, n_heads, 1);
  const auto kh = ad::split(k, n_heads, 1);
  const auto vh = ad::split(v, n_heads, 1);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(qh.front().shape()[1]));
  std::vector<ad::Var> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const ad::Var weights = ad::softmax(ad::scale(ad::matmul_transposed(qh[h], kh[h]), inv_sqrt));
    if (weights_out) weights_out->push_back(weights.value());
    heads.push_back(ad::matmul(weights, vh[h]));
  }
  return linear(ad::concat(heads, 1), p.wo, p.bo);
}

ad::Var recurrent_layer(const ad::Var& x, const RecurrentParams& p) {
  return ad::lstm(linear(x, p.w_input, p.bias), p.w_hidden);
}

// ---- NoiseEstimator ------------------------------------------------------

NoiseEstimator::Linear NoiseEstimator::make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor w({in, out});
  for (auto& v : w.data()) v = u(rng);
  Linear l;
  l.weight = params_.add(name + ".weight", std::move(w));
  l.bias = params_.add(name + ".bias", Tensor({out}, 0.0));
  return l;
}

NoiseEstimator::NoiseEstimator(EstimatorConfig config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model, c = config_.channels;
  Rng rng = make_rng(init_seed);

  auto make_mixer = [&](const std::string& name) {
    Mixer m;
    if (config_.use_attention) {
      auto q = make_linear(name + ".query", d, d, rng);
      auto k = make_linear(name + ".key", d, d, rng);
      auto v = make_linear(name + ".value", d, d, rng);
      auto o = make_linear(name + ".proj", d, d, rng);
      m.attention = {q.weight, q.bias, k.weight, k.bias, v.weight, v.bias, o.weight, o.bias};
    } else {
      auto in = make_linear(name + ".input", d, 4 * d, rng);
      const double bound = std::sqrt(6.0 / static_cast<double>(d + 4 * d));
      std::uniform_real_distribution<double> u(-bound, bound);
      Tensor wh({d, 4 * d});
      for (auto& v : wh.data()) v = u(rng);
      m.recurrent = {in.weight, params_.add(name + ".hidden.weight", std::move(wh)), in.bias};
    }
    return m;
  };

  embed_xt_ = make_linear("embed.xt", 1, d, rng);
  embed_load_ = make_linear("embed.load", 1, d, rng);
  embed_date_ = make_linear("embed.date", kDateEncodingWidth, d, rng);
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    const std::string prefix = "layers." + std::to_string(i);
    Layer layer;
    layer.x_in = make_linear(prefix + ".x_in", d, d, rng);
    layer.x_mix = make_mixer(prefix + ".x_mix");
    layer.c_in = make_linear(prefix + ".c_in", d, d, rng);
    layer.c_mix = make_mixer(prefix + ".c_mix");
    layer.gate = make_linear(prefix + ".gate", d, 2 * c, rng);
    layer.out = make_linear(prefix + ".out", c, d, rng);
    layers_.push_back(std::move(layer));
  }
  const std::size_t head_in = config_.use_skip_connections ? config_.n_layers * d : d;
  head_ = make_linear("head", head_in, 1, rng);
  positions_ = ad::Var::constant(positional_encoding(config_.seq_len, d));
}

ad::Var NoiseEstimator::embed_xt(const ad::Var& xt) const {
  if (xt.shape() != Shape{config_.seq_len}) {
    throw ShapeError("noisy input must have shape (" + std::to_string(config_.seq_len) + "), got " + to_string(xt.shape()));
  }
  return ad::add(linear(ad::reshape(xt, {config_.seq_len, 1}), embed_xt_.weight, embed_xt_.bias), positions_);
}

ad::Var NoiseEstimator::embed_load(const ad::Var& typical_load) const {
  if (typical_load.shape() != Shape{config_.seq_len}) {
    throw ShapeError("typical load must have shape (" + std::to_string(config_.seq_len) + "), got " +
                     to_string(typical_load.shape()));
  }
  return ad::add(linear(ad::reshape(typical_load, {config_.seq_len, 1}), embed_load_.weight, embed_load_.bias),
                 positions_);
}

ad::Var NoiseEstimator::embed_date(Date date) const {
  const ad::Var one_hot = ad::Var::constant(Tensor({1, kDateEncodingWidth}, date_one_hot(date).storage()));
  return ad::reshape(linear(one_hot, embed_date_.weight, embed_date_.bias), {config_.d_model});
}

EmbeddedInputs NoiseEstimator::embed(const ad::Var& xt, int t, const diffusion::Condition& condition) const {
  EmbeddedInputs e;
  e.t_emb = ad::Var::constant(embed_timestep(t, config_.d_model));
  e.xt_emb = embed_xt(xt);
  e.cond_load_emb = embed_load(ad::Var::constant(Tensor::vector(condition.typical_load)));
  e.cond_date_emb = embed_date(condition.date);
  return e;
}

ad::Var NoiseEstimator::mix(const Mixer& m, const ad::Var& x, std::vector<Tensor>* attention) const {
  if (config_.use_attention) return multi_head_self_attention(x, m.attention, config_.n_heads, attention);
  return recurrent_layer(x, m.recurrent);
}

ad::Var NoiseEstimator::condition_branch(std::size_t layer, const ad::Var& cond_load_emb, const ad::Var& cond_date_emb,
                                         std::vector<Tensor>* attention) const {
  const Layer& l = layers_.at(layer);
  return mix(l.c_mix, linear(ad::add(cond_load_emb, cond_date_emb), l.c_in.weight, l.c_in.bias), attention);
}

LayerOutput NoiseEstimator::finish_layer(const Layer& l, const ad::Var& xt_emb, const ad::Var& t_emb,
                                         const ad::Var& cond_part, std::vector<Tensor>* attention) const {
  const ad::Var x_part = mix(l.x_mix, linear(ad::add(xt_emb, t_emb), l.x_in.weight, l.x_in.bias), attention);
  const ad::Var total = linear(ad::add(x_part, cond_part), l.gate.weight, l.gate.bias);
  const auto chunks = ad::split(total, 2, 1);
  const ad::Var gated = ad::mul(ad::sigmoid(chunks[0]), ad::tanh(chunks[1]));
  LayerOutput out;
  out.x_output = linear(gated, l.out.weight, l.out.bias);
  out.x_res = ad::add(out.x_output, xt_emb);
  return out;
}

LayerOutput NoiseEstimator::residual_layer(std::size_t layer, const ad::Var& xt_emb, const ad::Var& t_emb,
                                           const ad::Var& cond_load_emb, const ad::Var& cond_date_emb,
                                           std::vector<Tensor>* attention) const {
  const ad::Var cond_part = condition_branch(layer, cond_load_emb, cond_date_emb, attention);
  return finish_layer(layers_.at(layer), xt_emb, t_emb, cond_part, attention);
}

ad::Var NoiseEstimator::head(const std::vector<ad::Var>& outputs) const {
  const ad::Var features = config_.use_skip_connections ? ad::concat(outputs, 1) : outputs.back();
  return ad::reshape(linear(features, head_.weight, head_.bias), {config_.seq_len});
}

ad::Var NoiseEstimator::estimate(const ad::Var& xt, int t, const diffusion::Condition& condition) const {
  const EmbeddedInputs e = embed(xt, t, condition);
  std::vector<ad::Var> outputs;
  outputs.reserve(layers_.size());
  ad::Var x = e.xt_emb;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    LayerOutput out = residual_layer(i, x, e.t_emb, e.cond_load_emb, e.cond_date_emb);
    outputs.push_back(out.x_output);
    x = out.x_res;
  }
  return head(outputs);
}

diffusion::BoundEstimator NoiseEstimator::bind(const diffusion::Condition& condition) const {
  ad::NoGradGuard no_grad;
  const ad::Var load_emb = embed_load(ad::Var::constant(Tensor::vector(condition.typical_load)));
  const ad::Var date_emb = embed_date(condition.date);
  std::vector<ad::Var> cond_parts;
  for (std::size_t i = 0; i < layers_.size(); ++i) cond_parts.push_back(condition_branch(i, load_emb, date_emb));
  // The closure reads this estimator's parameters and must not outlive it.
  return [this, cond_parts = std::move(cond_parts)](const Tensor& xt, int t) {
    ad::NoGradGuard guard;
    const ad::Var t_emb = ad::Var::constant(embed_timestep(t, config_.d_model));
    ad::Var x = embed_xt(ad::Var::constant(xt));
    std::vector<ad::Var> outputs;
    outputs.reserve(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      LayerOutput out = finish_layer(layers_[i], x, t_emb, cond_parts[i], nullptr);
      outputs.push_back(out.x_output);
      x = out.x_res;
    }
    return head(outputs).value();
  };
}

}  // namespace loadsynth::nn
