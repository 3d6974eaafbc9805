#pragma once

#include "catgen/data.hpp"

#include <span>
#include <string>
#include <vector>

namespace catgen {

struct GrangerResult {
  std::string driver;
  std::string target;
  std::size_t lag = 1;
  double f_stat = 0.0;
  double p_value = 1.0;
  double rss_restricted = 0.0;
  double rss_unrestricted = 0.0;
};

/// Does lagged `x` improve the prediction of `y` beyond lagged `y`?
///
/// Fits y_t on [1, y_{t-1..t-lag}] (restricted) and on
/// [1, y_{t-1..t-lag}, x_{t-1..t-lag}] (unrestricted) by Householder QR and
/// returns F = ((RSS_r - RSS_u) / lag) / (RSS_u / (n_eff - 2 lag - 1)) with its
/// F(lag, n_eff - 2 lag - 1) upper-tail p-value. n_eff = n - lag.
///
/// Throws DataError for series shorter than 3 lag + 3, unequal lengths, or a
/// rank-deficient design (e.g. a constant series).
GrangerResult granger_test(std::span<const double> x, std::span<const double> y, std::size_t lag);

struct ScreenResult {
  std::vector<GrangerResult> top;
  std::size_t skipped_pairs = 0;  // degenerate pairs
};

/// Tests every ordered gene pair (rows as series over the column order) and
/// returns the top_k by F descending; ties by (driver, target) id.
/// `threads` = 0 uses the hardware concurrency.
ScreenResult granger_screen(const ExpressionMatrix& m, std::size_t lag, std::size_t top_k,
                            std::size_t threads = 0);

/// Sum of F statistics over each gene's outgoing pairs; used to order genes
/// drivers-first. Degenerate pairs contribute zero.
std::vector<double> granger_out_scores(const Eigen::MatrixXd& series, std::size_t lag, std::size_t threads = 0);

/// driver,target,lag,f_stat,p_value
void write_granger_csv(const std::vector<GrangerResult>& results, const std::filesystem::path& path);

}  // namespace catgen
