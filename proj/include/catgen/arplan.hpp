#pragma once

#include "catgen/rng.hpp"

#include <string>
#include <vector>

namespace catgen {

/// Partition of S gene tokens into N ordered autoregressive steps.
/// Step i covers token positions [cs[i], cs[i+1]).
struct ARStepPlan {
  std::size_t S = 0;
  std::vector<std::size_t> sz;  // N split sizes, each >= 1
  std::vector<std::size_t> cs;  // N + 1 boundaries: 0, running sums, S

  std::size_t steps() const { return sz.size(); }
  /// AR step owning token position `pos`.
  std::size_t step_of(std::size_t pos) const;

  /// Plan from sorted distinct cut points in [1, S).
  static ARStepPlan from_cut_points(std::size_t S, std::vector<std::size_t> cuts);
  /// Plan from split sizes (all >= 1).
  static ARStepPlan from_sizes(std::vector<std::size_t> sizes);
  /// `k` contiguous groups of near-equal width (larger groups first).
  static ARStepPlan equal_groups(std::size_t S, std::size_t k);

  /// Throws UsageError unless sum(sz) == S, sz >= 1 and cs matches sz.
  void validate() const;

  /// "sz=2,2,3"
  std::string to_string() const;
  /// Parses "2,2,3" or "sz=2,2,3".
  static ARStepPlan parse(const std::string& text);
};

/// Normalized geometric weights b * alpha^i, i in [0, S), b = (1 - alpha) / (1 - alpha^S).
/// alpha == 1 gives the uniform distribution.
std::vector<double> ar_step_count_weights(std::size_t S, double alpha);

/// Draws N in [1, S] with P(N = i + 1) = b alpha^i (uniform when alpha == 1),
/// then N - 1 distinct cut points from [1, S) by partial Fisher-Yates.
ARStepPlan generate_ar_steps(std::size_t S, double alpha, Rng& rng);

}  // namespace catgen
