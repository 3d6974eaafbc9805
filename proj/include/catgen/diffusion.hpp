#pragma once

#include "catgen/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace catgen {

/// Variance schedule beta_1..beta_T with alpha_t = 1 - beta_t and the running
/// product alpha_bar_t. Timesteps are 1-based everywhere in the public API.
class DiffusionSchedule {
 public:
  /// Linear interpolation between beta_start and beta_end, both inclusive.
  static DiffusionSchedule linear(int T, double beta_start = 1e-4, double beta_end = 2e-2);

  /// Arbitrary betas in [0, 1). Monotonicity is not checked; this is the
  /// constructor for respaced and edge-case schedules.
  static DiffusionSchedule from_betas(std::vector<double> betas);

  int T() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(index(t)); }
  double alpha(int t) const { return 1.0 - beta(t); }
  /// alpha_bar(0) == 1 by convention.
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_.at(index(t)); }
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  /// Subschedule over the ascending timesteps `grid` with
  /// beta'_k = 1 - alpha_bar(grid_k) / alpha_bar(grid_{k-1}), alpha_bar(grid_0 - 1) := 1.
  DiffusionSchedule respaced(const std::vector<int>& grid) const;

 private:
  explicit DiffusionSchedule(std::vector<double> betas);
  std::size_t index(int t) const;

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps, elementwise over any shape.
Eigen::MatrixXd forward_sample(const Eigen::MatrixXd& x0, int t, const DiffusionSchedule& schedule,
                               const Eigen::MatrixXd& eps);

/// How training draws timesteps and how inference walks them.
struct SamplingStrategy {
  enum class Kind { full, fractional, adaptive };
  Kind kind = Kind::full;
  int n = 1;            // fractional(n)
  double decay = 0.8;   // adaptive: AR step s weighted by decay^s

  /// "full", "frac:<n>" or "adaptive".
  static SamplingStrategy parse(const std::string& text, double decay = 0.8);
  std::string to_string() const;
};

/// Ascending candidate timesteps. fractional(n): T, T-n, ..., floor(T/n)
/// elements, so the largest timestep is always present.
std::vector<int> candidate_timesteps(const DiffusionSchedule& schedule, const SamplingStrategy& strategy);

/// Ascending grid walked at inference for AR group `group`. Adaptive strategies
/// thin later groups to stride ceil(decay^-group); the others use their
/// candidate set for every group.
std::vector<int> inference_timesteps(const DiffusionSchedule& schedule, const SamplingStrategy& strategy,
                                     std::size_t group);

struct TimestepPlan {
  SamplingStrategy strategy;
  std::vector<std::vector<int>> per_ar_step_timesteps;
};

/// full / fractional: `draws_per_step` uniform draws from the candidate set for
/// every AR step. adaptive: n_ar_steps * draws_per_step draws in total, each
/// assigned to AR step s with probability proportional to decay^s and drawn
/// uniformly on [1, T].
TimestepPlan sample_timesteps(const DiffusionSchedule& schedule, const SamplingStrategy& strategy,
                              std::size_t n_ar_steps, std::size_t draws_per_step, Rng& rng);

}  // namespace catgen
