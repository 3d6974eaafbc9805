#include "catgen/arplan.hpp"

#include "catgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace catgen {

std::size_t ARStepPlan::step_of(std::size_t pos) const {
  auto it = std::upper_bound(cs.begin(), cs.end(), pos);
  return static_cast<std::size_t>(it - cs.begin()) - 1;
}

ARStepPlan ARStepPlan::from_cut_points(std::size_t S, std::vector<std::size_t> cuts) {
  std::sort(cuts.begin(), cuts.end());
  ARStepPlan plan;
  plan.S = S;
  plan.cs.push_back(0);
  for (std::size_t c : cuts) plan.cs.push_back(c);
  plan.cs.push_back(S);
  for (std::size_t i = 0; i + 1 < plan.cs.size(); ++i) {
    if (plan.cs[i + 1] <= plan.cs[i]) throw UsageError("cut points must be distinct and inside [1, S)");
    plan.sz.push_back(plan.cs[i + 1] - plan.cs[i]);
  }
  return plan;
}

ARStepPlan ARStepPlan::from_sizes(std::vector<std::size_t> sizes) {
  ARStepPlan plan;
  plan.cs.push_back(0);
  for (std::size_t s : sizes) {
    if (s == 0) throw UsageError("AR split sizes must be positive");
    plan.cs.push_back(plan.cs.back() + s);
  }
  plan.S = plan.cs.back();
  plan.sz = std::move(sizes);
  if (plan.S == 0) throw UsageError("AR plan must cover at least one token");
  return plan;
}

ARStepPlan ARStepPlan::equal_groups(std::size_t S, std::size_t k) {
  if (S == 0) throw UsageError("AR plan must cover at least one token");
  k = std::clamp<std::size_t>(k, 1, S);
  std::vector<std::size_t> sizes(k, S / k);
  for (std::size_t i = 0; i < S % k; ++i) ++sizes[i];
  return from_sizes(std::move(sizes));
}

void ARStepPlan::validate() const {
  if (sz.empty() || cs.size() != sz.size() + 1 || cs.front() != 0 || cs.back() != S) {
    throw UsageError("inconsistent AR plan");
  }
  for (std::size_t i = 0; i < sz.size(); ++i) {
    if (sz[i] == 0 || cs[i + 1] != cs[i] + sz[i]) throw UsageError("inconsistent AR plan");
  }
}

std::string ARStepPlan::to_string() const {
  std::ostringstream out;
  out << "sz=";
  for (std::size_t i = 0; i < sz.size(); ++i) out << (i ? "," : "") << sz[i];
  return out.str();
}

ARStepPlan ARStepPlan::parse(const std::string& text) {
  std::string body = text.rfind("sz=", 0) == 0 ? text.substr(3) : text;
  std::vector<std::size_t> sizes;
  std::stringstream in(body);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      sizes.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("bad split size '" + item + "' in '" + text + "'");
    }
  }
  return from_sizes(std::move(sizes));
}

std::vector<double> ar_step_count_weights(std::size_t S, double alpha) {
  if (S == 0) throw UsageError("AR steps need S >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("AR decay must lie in (0, 1]");
  if (alpha == 1.0) return std::vector<double>(S, 1.0 / static_cast<double>(S));
  const double b = (1.0 - alpha) / (1.0 - std::pow(alpha, static_cast<double>(S)));
  std::vector<double> p(S);
  for (std::size_t i = 0; i < S; ++i) p[i] = b * std::pow(alpha, static_cast<double>(i));
  return p;
}

ARStepPlan generate_ar_steps(std::size_t S, double alpha, Rng& rng) {
  const auto weights = ar_step_count_weights(S, alpha);
  const std::size_t N = alpha == 1.0 ? static_cast<std::size_t>(rng.below(S)) + 1 : rng.categorical(weights) + 1;

  std::vector<std::size_t> pool(S - 1);
  std::iota(pool.begin(), pool.end(), 1);
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(N - 1);
  return ARStepPlan::from_cut_points(S, std::move(pool));
}

}  // namespace catgen
