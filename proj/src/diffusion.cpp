#include "catgen/diffusion.hpp"

#include "catgen/error.hpp"

#include <algorithm>
#include <cmath>

namespace catgen {

DiffusionSchedule::DiffusionSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw UsageError("diffusion schedule needs at least one step");
  alpha_bars_.resize(betas_.size());
  // Accumulate in log space; the direct running product loses relative
  // precision over thousands of factors close to one.
  double log_sum = 0.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b >= 0.0 && b < 1.0)) throw UsageError("diffusion betas must lie in [0, 1)");
    log_sum += std::log1p(-b);
    alpha_bars_[i] = std::exp(log_sum);
  }
}

DiffusionSchedule DiffusionSchedule::linear(int T, double beta_start, double beta_end) {
  if (T < 1) throw UsageError("diffusion T must be at least 1");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw UsageError("diffusion betas need 0 < beta_start < beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(T));
  if (T == 1) {
    betas[0] = beta_start;
  } else {
    for (int i = 0; i < T; ++i) {
      const double w = static_cast<double>(i) / static_cast<double>(T - 1);
      betas[static_cast<std::size_t>(i)] = beta_start + w * (beta_end - beta_start);
    }
  }
  return DiffusionSchedule(std::move(betas));
}

DiffusionSchedule DiffusionSchedule::from_betas(std::vector<double> betas) {
  return DiffusionSchedule(std::move(betas));
}

std::size_t DiffusionSchedule::index(int t) const {
  if (t < 1 || t > T()) {
    throw UsageError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T()) + "]");
  }
  return static_cast<std::size_t>(t - 1);
}

DiffusionSchedule DiffusionSchedule::respaced(const std::vector<int>& grid) const {
  std::vector<double> betas;
  betas.reserve(grid.size());
  double prev = 1.0;
  for (int t : grid) {
    const double ab = alpha_bar(t);
    betas.push_back(1.0 - ab / prev);
    prev = ab;
  }
  return DiffusionSchedule(std::move(betas));
}

Eigen::MatrixXd forward_sample(const Eigen::MatrixXd& x0, int t, const DiffusionSchedule& schedule,
                               const Eigen::MatrixXd& eps) {
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) {
    throw UsageError("forward_sample: noise shape does not match signal");
  }
  if (t < 1 || t > schedule.T()) {
    throw UsageError("forward_sample: timestep " + std::to_string(t) + " out of range");
  }
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

SamplingStrategy SamplingStrategy::parse(const std::string& text, double decay) {
  SamplingStrategy s;
  s.decay = decay;
  if (text == "full") {
    s.kind = Kind::full;
  } else if (text == "adaptive") {
    s.kind = Kind::adaptive;
  } else if (text.rfind("frac:", 0) == 0) {
    s.kind = Kind::fractional;
    try {
      s.n = std::stoi(text.substr(5));
    } catch (const std::exception&) {
      throw UsageError("bad fractional sampling '" + text + "'");
    }
    if (s.n < 1) throw UsageError("fractional sampling needs n >= 1");
  } else {
    throw UsageError("unknown sampling strategy '" + text + "' (expected full, frac:<n> or adaptive)");
  }
  return s;
}

std::string SamplingStrategy::to_string() const {
  switch (kind) {
    case Kind::full: return "full";
    case Kind::fractional: return "frac:" + std::to_string(n);
    case Kind::adaptive: return "adaptive";
  }
  return "full";
}

namespace {

std::vector<int> strided_grid(int T, int stride) {
  std::vector<int> grid;
  const int count = T / stride;
  grid.reserve(static_cast<std::size_t>(count));
  for (int k = count - 1; k >= 0; --k) grid.push_back(T - k * stride);
  return grid;
}

}  // namespace

std::vector<int> candidate_timesteps(const DiffusionSchedule& schedule, const SamplingStrategy& strategy) {
  const int T = schedule.T();
  if (strategy.kind == SamplingStrategy::Kind::fractional) {
    if (strategy.n > T) throw UsageError("fractional sampling n exceeds T");
    return strided_grid(T, strategy.n);
  }
  return strided_grid(T, 1);
}

std::vector<int> inference_timesteps(const DiffusionSchedule& schedule, const SamplingStrategy& strategy,
                                     std::size_t group) {
  if (strategy.kind != SamplingStrategy::Kind::adaptive) return candidate_timesteps(schedule, strategy);
  const double raw = std::pow(strategy.decay, -static_cast<double>(group));
  const int stride = std::clamp(static_cast<int>(std::ceil(raw - 1e-9)), 1, schedule.T());
  return strided_grid(schedule.T(), stride);
}

TimestepPlan sample_timesteps(const DiffusionSchedule& schedule, const SamplingStrategy& strategy,
                              std::size_t n_ar_steps, std::size_t draws_per_step, Rng& rng) {
  if (n_ar_steps < 1) throw UsageError("sample_timesteps needs at least one AR step");
  TimestepPlan plan;
  plan.strategy = strategy;
  plan.per_ar_step_timesteps.resize(n_ar_steps);
  if (strategy.kind == SamplingStrategy::Kind::adaptive) {
    if (!(strategy.decay > 0.0 && strategy.decay <= 1.0)) throw UsageError("adaptive decay must lie in (0, 1]");
    std::vector<double> weights(n_ar_steps);
    for (std::size_t s = 0; s < n_ar_steps; ++s) weights[s] = std::pow(strategy.decay, static_cast<double>(s));
    const auto T = static_cast<std::uint64_t>(schedule.T());
    for (std::size_t k = 0; k < n_ar_steps * draws_per_step; ++k) {
      const std::size_t s = rng.categorical(weights);
      plan.per_ar_step_timesteps[s].push_back(static_cast<int>(rng.below(T)) + 1);
    }
    return plan;
  }
  const auto candidates = candidate_timesteps(schedule, strategy);
  for (auto& step : plan.per_ar_step_timesteps) {
    step.reserve(draws_per_step);
    for (std::size_t k = 0; k < draws_per_step; ++k) step.push_back(candidates[rng.below(candidates.size())]);
  }
  return plan;
}

}  // namespace catgen
