#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "loadsynth/autodiff.hpp"
#include "loadsynth/date.hpp"
#include "loadsynth/diffusion.hpp"
#include "loadsynth/rng.hpp"

namespace loadsynth::nn {

// One-hot month (12) followed by one-hot ISO weekday (7).
inline constexpr std::size_t kDateEncodingWidth = 19;

struct EstimatorConfig {
  std::size_t d_model = 16;
  std::size_t n_layers = 6;
  std::size_t n_heads = 4;
  std::size_t channels = 16;  // width of each gated chunk
  std::size_t seq_len = 48;
  bool use_attention = true;         // false: recurrent sequence layer instead of MHSA
  bool use_skip_connections = true;  // false: head reads only the last layer

  void validate() const;
};

// t_emb(2i) = sin(t * 10^(16 i / d_model)), t_emb(2i + 1) = cos(same).
Tensor embed_timestep(double t, std::size_t d_model);
// Standard transformer table: PE(p, 2i) = sin(p / 10000^(2i/d)), PE(p, 2i+1) = cos(same).
Tensor positional_encoding(std::size_t length, std::size_t d_model);
Tensor date_one_hot(Date date);

ad::Var linear(const ad::Var& x, const ad::Var& weight, const ad::Var& bias);

struct AttentionParams {
  ad::Var wq, bq, wk, bk, wv, bv, wo, bo;
};

struct RecurrentParams {
  ad::Var w_input, w_hidden, bias;  // gates ordered input, forget, cell, output
};

// Scaled dot-product attention per head over the rows of x (sequence x d_model).
// Appends each head's attention matrix to weights_out when given.
ad::Var multi_head_self_attention(const ad::Var& x, const AttentionParams& p, std::size_t n_heads,
                                  std::vector<Tensor>* weights_out = nullptr);

// Single-direction LSTM over the rows of x, zero initial state; returns every hidden state.
ad::Var recurrent_layer(const ad::Var& x, const RecurrentParams& p);

struct EmbeddedInputs {
  ad::Var t_emb;          // (d_model)
  ad::Var xt_emb;         // (L, d_model)
  ad::Var cond_load_emb;  // (L, d_model)
  ad::Var cond_date_emb;  // (d_model)
};

struct LayerOutput {
  ad::Var x_res;
  ad::Var x_output;
};

class NoiseEstimator : public diffusion::TrainableNoiseModel {
 public:
  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  NoiseEstimator(EstimatorConfig config, std::uint64_t init_seed);
  NoiseEstimator(const NoiseEstimator&) = delete;
  NoiseEstimator& operator=(const NoiseEstimator&) = delete;
  NoiseEstimator(NoiseEstimator&&) = default;

  const EstimatorConfig& config() const { return config_; }
  ad::ParameterSet& parameters() override { return params_; }
  const ad::ParameterSet& parameters() const { return params_; }

  ad::Var embed_xt(const ad::Var& xt) const;
  ad::Var embed_load(const ad::Var& typical_load) const;
  ad::Var embed_date(Date date) const;
  EmbeddedInputs embed(const ad::Var& xt, int t, const diffusion::Condition& condition) const;

  // The condition half of x_total; depends only on the condition embeddings.
  ad::Var condition_branch(std::size_t layer, const ad::Var& cond_load_emb, const ad::Var& cond_date_emb,
                           std::vector<Tensor>* attention = nullptr) const;
  LayerOutput residual_layer(std::size_t layer, const ad::Var& xt_emb, const ad::Var& t_emb, const ad::Var& cond_load_emb,
                             const ad::Var& cond_date_emb, std::vector<Tensor>* attention = nullptr) const;

  ad::Var estimate(const ad::Var& xt, int t, const diffusion::Condition& condition) const override;
  diffusion::BoundEstimator bind(const diffusion::Condition& condition) const override;

 private:
  struct Linear {
    ad::Var weight, bias;
  };
  struct Mixer {
    AttentionParams attention;
    RecurrentParams recurrent;
  };
  struct Layer {
    Linear x_in, c_in;
    Mixer x_mix, c_mix;
    Linear gate, out;
  };

  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  ad::Var mix(const Mixer& m, const ad::Var& x, std::vector<Tensor>* attention) const;
  LayerOutput finish_layer(const Layer& layer, const ad::Var& xt_emb, const ad::Var& t_emb, const ad::Var& cond_part,
                           std::vector<Tensor>* attention) const;
  ad::Var head(const std::vector<ad::Var>& outputs) const;

  EstimatorConfig config_;
  ad::ParameterSet params_;
  Linear embed_xt_, embed_load_, embed_date_;
  std::vector<Layer> layers_;
  Linear head_;
  ad::Var positions_;
};

}  // namespace loadsynth::nn
