#pragma once

#include "catgen/autodiff.hpp"
#include "catgen/mask.hpp"
#include "catgen/rng.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace catgen {

/// Architecture hyperparameters of the causality-aware transformer.
struct CatConfig {
  std::size_t st_dim = 0;  // p: spots per ST gene profile
  std::size_t sc_dim = 0;  // q: cells per SC gene profile
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t blocks = 3;
  std::size_t ffn_mult = 4;
  std::size_t enc_hidden = 128;

  void validate() const;
};

enum class EncoderHead { st, sc };

/// All trainable tensors: the two encoder heads (each with an optional
/// log-variance output), transformer blocks, time embedding, condition pairing
/// projection, noise head and decoder.
///
/// Parameter storage never reallocates after construction, so references and
/// addresses handed to a Tape stay valid for the model's lifetime.
class CatModel {
 public:
  CatModel() = default;
  CatModel(CatConfig cfg, std::uint64_t seed);

  const CatConfig& config() const { return cfg_; }

  std::vector<ad::Parameter>& parameters() { return params_; }
  const std::vector<ad::Parameter>& parameters() const { return params_; }
  ad::Parameter& param(const std::string& name);
  const ad::Parameter& param(const std::string& name) const;
  bool has_param(const std::string& name) const { return index_.count(name) != 0; }

  /// Multiplier mapping encoder latents to the unit-scale diffusion space.
  double latent_scale() const { return param("latent_scale").value(0, 0); }
  void set_latent_scale(double s) { param("latent_scale").value(0, 0) = s; }
  /// Largest |entry| of scaled training latents (with margin); sampling
  /// clamps its running estimate of the clean latent to this range.
  double latent_bound() const { return param("latent_bound").value(0, 0); }
  void set_latent_bound(double b) { param("latent_bound").value(0, 0) = b; }

  /// Rebuilds from named tensors (checkpoint loading). Shapes must match the
  /// layout implied by `cfg`.
  static CatModel from_tensors(CatConfig cfg, const std::vector<ad::Parameter>& tensors);

 private:
  void add(std::string name, ad::Matrix value, bool trainable = true);
  void build(Rng* init);

  CatConfig cfg_;
  std::vector<ad::Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Lazily records model parameters on a tape: only parameters actually used by
/// a computation appear on it.
class BoundModel {
 public:
  BoundModel(ad::Tape& tape, const CatModel& model) : tape_(tape), model_(model) {}
  ad::Var operator[](const std::string& name);
  ad::Tape& tape() { return tape_; }
  const CatModel& model() const { return model_; }

 private:
  ad::Tape& tape_;
  const CatModel& model_;
  std::unordered_map<std::string, ad::Var> bound_;
};

struct Encoded {
  ad::Var mean;
  ad::Var logvar;  // valid only when variational
  ad::Var z;       // sample when variational, otherwise the mean
};

/// Encodes rows of `x` (genes x input dim) with head e1 (ST) or e2 (SC).
/// Variational mode returns mean + exp(logvar / 2) * eps with logvar clamped
/// to [-20, 10] and eps drawn from `rng`.
Encoded encode(BoundModel& m, ad::Var x, EncoderHead head, bool variational, Rng* rng);

/// Mean KL(N(mean, exp(logvar)) || N(0, I)) per latent entry.
ad::Var kl_divergence(const Encoded& e);

/// Latent rows (genes x d) back to ST feature space (genes x p).
ad::Var decode(BoundModel& m, ad::Var latent);

/// Sinusoidal basis (base 10000) for each timestep; rows = timesteps, width d.
ad::Matrix sinusoidal_embedding(const std::vector<int>& timesteps, std::size_t d);

/// Multi-head attention with a blocked-entry mask (blocked -> -inf logit).
ad::Var multi_head_attention(ad::Var x, ad::Var wq, ad::Var wk, ad::Var wv, ad::Var wo, ad::Var bo,
                             std::size_t heads, const ad::BoolMatrix& blocked);

/// Token-level inputs of one CAT forward pass, laid out as
/// [c condition | v clean | s noisy] to match an AttentionMask.
struct TokenInputs {
  ad::Var condition;  // c x d
  ad::Var clean;      // v x d
  ad::Var noisy;      // s x d
  std::vector<int> noisy_timesteps;       // s entries in [1, T]
  std::vector<double> noisy_alpha_bars;   // cumulative signal level at each noisy token's timestep
  std::vector<Eigen::Index> clean_pair;   // condition row paired with each clean token
  std::vector<Eigen::Index> noisy_pair;   // condition row paired with each noisy token
};

/// Value-level token batch (no gradients), mirroring TokenInputs.
struct TokenBatch {
  ad::Matrix condition;
  ad::Matrix clean;
  ad::Matrix noisy;
  std::vector<int> noisy_timesteps;
  std::vector<double> noisy_alpha_bars;
  std::vector<int> clean_timesteps;  // always 0: clean tokens are never noised
  std::vector<Eigen::Index> clean_pair;
  std::vector<Eigen::Index> noisy_pair;
  ARStepPlan plan;

  /// Condition i paired with clean token i and noisy token i.
  static TokenBatch aligned(ad::Matrix condition, ad::Matrix clean, ad::Matrix noisy, std::vector<int> timesteps,
                            std::vector<double> alpha_bars, ARStepPlan plan);
};

/// Predicted noise for the s noisy tokens (s x d). Each clean and noisy token
/// is offset by a projection of its paired condition latent; noisy tokens also
/// receive the time embedding. The head predicts the clean latent x0, which is
/// converted to noise as (x_t - sqrt(abar) * x0) / sqrt(1 - abar); abar must lie
/// in [0, 1). Throws NumericError on non-finite output.
ad::Var cat_forward(BoundModel& m, const TokenInputs& in, const AttentionMask& mask);

/// Convenience forward without gradients.
ad::Matrix cat_forward(const CatModel& model, const TokenBatch& batch, const AttentionMask& mask);

ad::BoolMatrix to_bool_matrix(const AttentionMask& mask);

}  // namespace catgen
