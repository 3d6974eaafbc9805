#pragma once

#include "catgen/data.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace catgen {

/// Pearson correlation. Throws DataError for constant inputs.
double pcc(std::span<const double> a, std::span<const double> b);

/// Global SSIM after joint min-max scaling to [0, 1]. Two constant vectors
/// yield 1.
double ssim(std::span<const double> a, std::span<const double> b);

/// RMS difference of population z-scores.
double rmse_z(std::span<const double> a, std::span<const double> b);

/// Jensen-Shannon divergence (natural log) between the normalized, negative-
/// clamped inputs.
double js_divergence(std::span<const double> a, std::span<const double> b);

struct Aggregate {
  double mean = 0.0;
  double variance = 0.0;  // population
};
Aggregate aggregate(std::span<const double> per_gene);

struct GeneMetrics {
  std::string gene;
  double pcc = 0.0;
  double ssim = 0.0;
  double rmse = 0.0;
  double js = 0.0;
};

/// Per-gene metrics for every gene of `pred`, compared with the same gene and
/// observations of `truth`.
std::vector<GeneMetrics> evaluate(const ExpressionMatrix& pred, const ExpressionMatrix& truth);

/// Per-gene rows followed by `mean` and `variance` rows.
void write_metrics_csv(const std::vector<GeneMetrics>& rows, const std::filesystem::path& path);

}  // namespace catgen
