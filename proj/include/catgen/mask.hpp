#pragma once

#include "catgen/arplan.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace catgen {

/// seq x seq attention mask over [c condition | v clean | s noisy] tokens.
/// Entry 1 = attention blocked, 0 = allowed.
struct AttentionMask {
  std::size_t seq = 0;
  std::size_t c = 0;
  std::size_t v = 0;
  std::size_t s = 0;
  std::vector<std::uint8_t> blocked;  // row-major, row = query, column = key

  std::size_t ctx() const { return c + v; }
  bool is_blocked(std::size_t row, std::size_t col) const { return blocked[row * seq + col] != 0; }
  bool operator==(const AttentionMask&) const = default;
};

/// Block construction: condition columns cleared, then the visible-to-visible,
/// sample-to-visible and sample-to-sample partitions written at their offsets.
AttentionMask build_mask(std::size_t s, std::size_t c, const ARStepPlan& plan);

/// Independent construction from the attention rules, one entry at a time:
/// (r, q) is allowed iff q is a condition token, or r and q are clean with
/// step(q) <= step(r), or r is noisy and q clean with step(q) < step(r), or r
/// and q are noisy in the same step.
AttentionMask mask_oracle(std::size_t s, std::size_t c, const ARStepPlan& plan);

void write_mask_csv(const AttentionMask& mask, const std::filesystem::path& path);
/// Plain PBM (P1); black pixels are blocked entries.
void write_mask_pbm(const AttentionMask& mask, const std::filesystem::path& path);

}  // namespace catgen
