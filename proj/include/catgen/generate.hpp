#pragma once

#include "catgen/data.hpp"
#include "catgen/diffusion.hpp"
#include "catgen/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace catgen {

/// One ancestral DDPM step from t to t-1. No noise is added at t = 1.
Eigen::MatrixXd reverse_step(const Eigen::MatrixXd& xt, int t, const Eigen::MatrixXd& eps_hat,
                             const DiffusionSchedule& schedule, Rng& rng);

/// reverse_step after clamping the implied clean estimate
/// (x_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t) to [-bound, bound].
/// Identical to reverse_step whenever the estimate is inside the range.
Eigen::MatrixXd clipped_reverse_step(const Eigen::MatrixXd& xt, int t, const Eigen::MatrixXd& eps_hat,
                                     const DiffusionSchedule& schedule, double bound, Rng& rng);

struct GenerateOptions {
  SamplingStrategy sampling;
  std::size_t ar_groups = 1;     // equal-width inference groups per chunk
  std::size_t batch_genes = 32;  // genes denoised jointly as one token sequence
  std::uint64_t seed = 42;
};

/// Generated latents (genes x d, in diffusion units) for SC profiles `sc_rows`
/// (genes x q), before decoding.
Eigen::MatrixXd generate_latents(const CatModel& model, const Eigen::MatrixXd& sc_rows,
                                 const DiffusionSchedule& schedule, const GenerateOptions& opts);

/// Predicted ST profiles for `target_genes`, conditioned on their SC rows.
/// Output values are clamped at 0; columns are labelled `spot_ids`.
ExpressionMatrix generate_genes(const ExpressionMatrix& sc, const std::vector<std::string>& target_genes,
                                const CatModel& model, const DiffusionSchedule& schedule,
                                const GenerateOptions& opts, const std::vector<std::string>& spot_ids);

}  // namespace catgen
