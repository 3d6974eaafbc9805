#include "catgen/metrics.hpp"

#include "catgen/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace catgen {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw DataError(std::string(what) + ": vectors differ in length");
  if (a.size() < 2) throw DataError(std::string(what) + ": need at least two entries");
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x, double mu) {
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / static_cast<double>(x.size());
}

std::vector<double> zscores(std::span<const double> x, const char* what) {
  const double mu = mean_of(x);
  const double sd = std::sqrt(variance_of(x, mu));
  if (sd == 0.0) throw DataError(std::string(what) + ": constant vector");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mu) / sd;
  return z;
}

std::vector<double> to_distribution(std::span<const double> x) {
  constexpr double eps = 1e-12;
  std::vector<double> p(x.size());
  double total = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = std::max(0.0, x[i]);
    any = any || v > 0.0;
    p[i] = v + eps;
    total += p[i];
  }
  if (!any) throw DataError("js_divergence: vector is all zero after clamping");
  for (double& v : p) v /= total;
  return p;
}

}  // namespace

double pcc(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "pcc");
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw DataError("pcc: correlation undefined for a constant vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double ssim(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "ssim");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  if (*amin == *amax && *bmin == *bmax) return 1.0;
  const double range = hi - lo;
  std::vector<double> sa(a.size()), sb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa[i] = (a[i] - lo) / range;
    sb[i] = (b[i] - lo) / range;
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const double ma = mean_of(sa);
  const double mb = mean_of(sb);
  const double va = variance_of(sa, ma);
  const double vb = variance_of(sb, mb);
  double cov = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) cov += (sa[i] - ma) * (sb[i] - mb);
  cov /= static_cast<double>(sa.size());
  return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

double rmse_z(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "rmse_z");
  const auto za = zscores(a, "rmse_z");
  const auto zb = zscores(b, "rmse_z");
  double s = 0.0;
  for (std::size_t i = 0; i < za.size(); ++i) s += (za[i] - zb[i]) * (za[i] - zb[i]);
  return std::sqrt(s / static_cast<double>(za.size()));
}

double js_divergence(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw DataError("js_divergence: vectors must be nonempty and equal length");
  const auto p = to_distribution(a);
  const auto q = to_distribution(b);
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    js += 0.5 * p[i] * std::log(p[i] / m) + 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::max(0.0, js);
}

Aggregate aggregate(std::span<const double> per_gene) {
  if (per_gene.empty()) throw DataError("aggregate: empty list");
  Aggregate out;
  out.mean = mean_of(per_gene);
  out.variance = variance_of(per_gene, out.mean);
  return out;
}

std::vector<GeneMetrics> evaluate(const ExpressionMatrix& pred, const ExpressionMatrix& truth) {
  std::vector<std::size_t> cols;
  cols.reserve(pred.n_obs());
  for (const auto& obs : pred.obs_ids) {
    auto it = std::find(truth.obs_ids.begin(), truth.obs_ids.end(), obs);
    if (it == truth.obs_ids.end()) throw DataError("observation '" + obs + "' missing from ground truth");
    cols.push_back(static_cast<std::size_t>(it - truth.obs_ids.begin()));
  }
  std::vector<GeneMetrics> out;
  out.reserve(pred.n_genes());
  std::vector<double> p(cols.size()), t(cols.size());
  for (std::size_t g = 0; g < pred.n_genes(); ++g) {
    const auto tg = static_cast<Eigen::Index>(truth.gene_index(pred.gene_ids[g]));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      p[j] = pred.values(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j));
      t[j] = truth.values(tg, static_cast<Eigen::Index>(cols[j]));
    }
    GeneMetrics m;
    m.gene = pred.gene_ids[g];
    // A constant prediction carries no spatial pattern: score it as
    // uncorrelated (pcc 0, z-score RMSE 1) rather than aborting the whole run.
    // A constant ground-truth gene is still an error.
    const bool flat = std::all_of(p.begin(), p.end(), [&](double v) { return v == p.front(); });
    try {
      if (flat) {
        zscores(t, "truth");
        m.pcc = 0.0;
        m.rmse = 1.0;
      } else {
        m.pcc = pcc(p, t);
        m.rmse = rmse_z(p, t);
      }
    } catch (const DataError& e) {
      throw DataError("gene '" + m.gene + "': " + e.what());
    }
    m.ssim = ssim(p, t);
    m.js = flat && p.front() <= 0.0 ? std::log(2.0) : js_divergence(p, t);
    out.push_back(m);
  }
  return out;
}

void write_metrics_csv(const std::vector<GeneMetrics>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  char buf[64];
  auto num = [&](double v) {
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  out << "gene,pcc,ssim,rmse,js\n";
  std::vector<double> cols[4];
  for (const auto& r : rows) {
    out << r.gene << ',' << num(r.pcc) << ',' << num(r.ssim) << ',' << num(r.rmse) << ',' << num(r.js) << '\n';
    cols[0].push_back(r.pcc);
    cols[1].push_back(r.ssim);
    cols[2].push_back(r.rmse);
    cols[3].push_back(r.js);
  }
  if (rows.empty()) return;
  Aggregate agg[4];
  for (int k = 0; k < 4; ++k) agg[k] = aggregate(cols[k]);
  out << "mean";
  for (const auto& a : agg) out << ',' << num(a.mean);
  out << "\nvariance";
  for (const auto& a : agg) out << ',' << num(a.variance);
  out << '\n';
}

}  // namespace catgen
