#include "catgen/granger.hpp"

#include "catgen/error.hpp"
#include "catgen/special.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <thread>

namespace catgen {

namespace {

double residual_sum_of_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) throw DataError("degenerate input: lagged design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(response);
  return (response - design * beta).squaredNorm();
}

std::size_t resolve_threads(std::size_t threads) {
  if (threads > 0) return threads;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n) over up to `threads` workers.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  const std::size_t workers = std::min(resolve_threads(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
}

std::vector<double> row_values(const Eigen::MatrixXd& m, Eigen::Index row) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(j)] = m(row, j);
  return out;
}

}  // namespace

GrangerResult granger_test(std::span<const double> x, std::span<const double> y, std::size_t lag) {
  if (lag < 1) throw DataError("Granger lag must be at least 1");
  if (x.size() != y.size()) throw DataError("Granger series must have equal length");
  const std::size_t n = y.size();
  if (n < 3 * lag + 3) {
    throw DataError("series of length " + std::to_string(n) + " too short for lag " + std::to_string(lag));
  }
  const auto n_eff = static_cast<Eigen::Index>(n - lag);
  const auto L = static_cast<Eigen::Index>(lag);

  Eigen::VectorXd response(n_eff);
  Eigen::MatrixXd unrestricted(n_eff, 2 * L + 1);
  for (Eigen::Index r = 0; r < n_eff; ++r) {
    const auto t = static_cast<std::size_t>(r) + lag;
    response(r) = y[t];
    unrestricted(r, 0) = 1.0;
    for (Eigen::Index k = 1; k <= L; ++k) {
      unrestricted(r, k) = y[t - static_cast<std::size_t>(k)];
      unrestricted(r, L + k) = x[t - static_cast<std::size_t>(k)];
    }
  }
  const Eigen::MatrixXd restricted = unrestricted.leftCols(L + 1);

  GrangerResult res;
  res.lag = lag;
  res.rss_restricted = residual_sum_of_squares(restricted, response);
  res.rss_unrestricted = residual_sum_of_squares(unrestricted, response);

  const double df1 = static_cast<double>(lag);
  const double df2 = static_cast<double>(n_eff - 2 * L - 1);
  // Nested models: any negative gain is rounding noise.
  const double gain = std::max(0.0, res.rss_restricted - res.rss_unrestricted);
  if (res.rss_unrestricted <= 0.0) {
    res.f_stat = gain > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    res.f_stat = (gain / df1) / (res.rss_unrestricted / df2);
  }
  res.p_value = special::f_survival(res.f_stat, df1, df2);
  return res;
}

ScreenResult granger_screen(const ExpressionMatrix& m, std::size_t lag, std::size_t top_k, std::size_t threads) {
  const std::size_t n = m.n_genes();
  if (n < 2) throw DataError("Granger screen needs at least two genes");

  std::vector<std::vector<double>> series(n);
  for (std::size_t g = 0; g < n; ++g) series[g] = row_values(m.values, static_cast<Eigen::Index>(g));

  // One slot per ordered pair; filled independently by the workers.
  std::vector<std::optional<GrangerResult>> slots(n * n);
  std::vector<std::size_t> skipped(n, 0);
  parallel_for(n, threads, [&](std::size_t driver) {
    for (std::size_t target = 0; target < n; ++target) {
      if (target == driver) continue;
      try {
        GrangerResult r = granger_test(series[driver], series[target], lag);
        r.driver = m.gene_ids[driver];
        r.target = m.gene_ids[target];
        slots[driver * n + target] = std::move(r);
      } catch (const DataError&) {
        ++skipped[driver];
      }
    }
  });

  ScreenResult out;
  for (std::size_t s : skipped) out.skipped_pairs += s;
  if (out.skipped_pairs > 0) spdlog::warn("granger screen skipped {} degenerate pairs", out.skipped_pairs);

  std::vector<GrangerResult> all;
  for (auto& s : slots) {
    if (s) all.push_back(std::move(*s));
  }
  auto better = [](const GrangerResult& a, const GrangerResult& b) {
    if (a.f_stat != b.f_stat) return a.f_stat > b.f_stat;
    if (a.driver != b.driver) return a.driver < b.driver;
    return a.target < b.target;
  };
  const std::size_t k = std::min(top_k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
  all.resize(k);
  out.top = std::move(all);
  return out;
}

std::vector<double> granger_out_scores(const Eigen::MatrixXd& series, std::size_t lag, std::size_t threads) {
  const auto n = static_cast<std::size_t>(series.rows());
  std::vector<std::vector<double>> rows(n);
  for (std::size_t g = 0; g < n; ++g) rows[g] = row_values(series, static_cast<Eigen::Index>(g));
  std::vector<double> scores(n, 0.0);
  parallel_for(n, threads, [&](std::size_t driver) {
    double total = 0.0;
    for (std::size_t target = 0; target < n; ++target) {
      if (target == driver) continue;
      try {
        const double f = granger_test(rows[driver], rows[target], lag).f_stat;
        total += std::isfinite(f) ? f : std::numeric_limits<double>::max() / static_cast<double>(n);
      } catch (const DataError&) {
      }
    }
    scores[driver] = total;
  });
  return scores;
}

void write_granger_csv(const std::vector<GrangerResult>& results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "driver,target,lag,f_stat,p_value\n";
  char buf[64];
  auto num = [&](double v) {
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  for (const auto& r : results) {
    out << r.driver << ',' << r.target << ',' << r.lag << ',' << num(r.f_stat) << ',' << num(r.p_value) << '\n';
  }
}

}  // namespace catgen
