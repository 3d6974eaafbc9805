#include "catgen/mask.hpp"

#include "catgen/error.hpp"

#include <fstream>

namespace catgen {

namespace {

void check_plan(std::size_t s, const ARStepPlan& plan) {
  plan.validate();
  if (plan.S != s) throw UsageError("AR plan covers " + std::to_string(plan.S) + " tokens, sample length is " +
                                    std::to_string(s));
}

AttentionMask blank(std::size_t s, std::size_t c, const ARStepPlan& plan) {
  AttentionMask m;
  m.s = s;
  m.c = c;
  m.v = s - plan.sz.back();
  m.seq = m.ctx() + s;
  m.blocked.assign(m.seq * m.seq, 1);
  return m;
}

// Clears rows [r0, r1) x cols [c0, c1) of a row-major block with `width` columns.
void clear(std::vector<std::uint8_t>& block, std::size_t width, std::size_t r0, std::size_t r1, std::size_t c0,
           std::size_t c1) {
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t q = c0; q < c1; ++q) block[r * width + q] = 0;
  }
}

}  // namespace

AttentionMask build_mask(std::size_t s, std::size_t c, const ARStepPlan& plan) {
  check_plan(s, plan);
  AttentionMask m = blank(s, c, plan);
  const auto& cs = plan.cs;
  const std::size_t v = m.v;
  const std::size_t N = plan.sz.size();

  std::vector<std::uint8_t> vtv(v * v, 1);
  std::vector<std::uint8_t> stv(s * v, 1);
  std::vector<std::uint8_t> sts(s * s, 1);
  for (std::size_t i = 0; i + 2 <= N; ++i) {
    clear(vtv, v, cs[i], cs[i + 1], 0, cs[i + 1]);
    clear(stv, v, cs[i + 1], cs[i + 2], 0, cs[i + 1]);
  }
  for (std::size_t i = 0; i < N; ++i) clear(sts, s, cs[i], cs[i + 1], cs[i], cs[i + 1]);

  const std::size_t ctx = m.ctx();
  for (std::size_t r = 0; r < m.seq; ++r) {
    for (std::size_t q = 0; q < c; ++q) m.blocked[r * m.seq + q] = 0;
  }
  for (std::size_t r = 0; r < v; ++r) {
    for (std::size_t q = 0; q < v; ++q) m.blocked[(c + r) * m.seq + c + q] = vtv[r * v + q];
  }
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t q = 0; q < v; ++q) m.blocked[(ctx + r) * m.seq + c + q] = stv[r * v + q];
    for (std::size_t q = 0; q < s; ++q) m.blocked[(ctx + r) * m.seq + ctx + q] = sts[r * s + q];
  }
  return m;
}

AttentionMask mask_oracle(std::size_t s, std::size_t c, const ARStepPlan& plan) {
  check_plan(s, plan);
  AttentionMask m = blank(s, c, plan);
  enum class Kind { condition, clean, noisy };
  struct Token {
    Kind kind;
    std::size_t step;
  };
  std::vector<Token> tokens;
  for (std::size_t i = 0; i < c; ++i) tokens.push_back({Kind::condition, 0});
  for (std::size_t i = 0; i < m.v; ++i) tokens.push_back({Kind::clean, plan.step_of(i)});
  for (std::size_t i = 0; i < s; ++i) tokens.push_back({Kind::noisy, plan.step_of(i)});

  for (std::size_t r = 0; r < m.seq; ++r) {
    for (std::size_t q = 0; q < m.seq; ++q) {
      const Token& a = tokens[r];
      const Token& b = tokens[q];
      const bool allowed = b.kind == Kind::condition ||
                           (a.kind == Kind::clean && b.kind == Kind::clean && b.step <= a.step) ||
                           (a.kind == Kind::noisy && b.kind == Kind::clean && b.step < a.step) ||
                           (a.kind == Kind::noisy && b.kind == Kind::noisy && b.step == a.step);
      m.blocked[r * m.seq + q] = allowed ? 0 : 1;
    }
  }
  return m;
}

void write_mask_csv(const AttentionMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t r = 0; r < mask.seq; ++r) {
    for (std::size_t q = 0; q < mask.seq; ++q) out << (q ? "," : "") << int(mask.blocked[r * mask.seq + q]);
    out << '\n';
  }
}

void write_mask_pbm(const AttentionMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "P1\n" << mask.seq << ' ' << mask.seq << '\n';
  for (std::size_t r = 0; r < mask.seq; ++r) {
    for (std::size_t q = 0; q < mask.seq; ++q) out << (q ? " " : "") << int(mask.blocked[r * mask.seq + q]);
    out << '\n';
  }
}

}  // namespace catgen
