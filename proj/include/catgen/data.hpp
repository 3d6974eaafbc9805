#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace catgen {

enum class Modality { ST, SC };

/// Genes x observations (spots or cells) expression values with identifiers.
struct ExpressionMatrix {
  std::vector<std::string> gene_ids;
  std::vector<std::string> obs_ids;
  Eigen::MatrixXd values;  // n_genes x n_obs
  Modality modality = Modality::ST;

  std::size_t n_genes() const { return gene_ids.size(); }
  std::size_t n_obs() const { return obs_ids.size(); }

  /// Throws DataError on shape mismatch, duplicate ids, non-finite or
  /// negative entries.
  void validate() const;

  /// Index of a gene id; throws DataError when absent.
  std::size_t gene_index(const std::string& id) const;

  /// Rows for the given gene ids, in the given order.
  ExpressionMatrix select_genes(const std::vector<std::string>& ids) const;
  ExpressionMatrix select_genes(const std::vector<std::size_t>& rows) const;
};

enum class TableFormat { csv, tsv };

/// Reads a matrix whose header row is `gene_id,<obs1>,...` and whose first
/// column holds gene ids.
ExpressionMatrix load_matrix(const std::filesystem::path& path, TableFormat format,
                             Modality modality = Modality::ST);

/// Writes with shortest round-trip formatting of every value.
void save_matrix(const ExpressionMatrix& m, const std::filesystem::path& path,
                 TableFormat format = TableFormat::csv);

/// Drops observations with fewer than the modality's threshold of nonzero genes.
ExpressionMatrix qc_filter(const ExpressionMatrix& m, std::size_t min_genes_sc = 500,
                           std::size_t min_genes_st = 1);

/// Median of a non-empty sample; mean of the two middle values for even sizes.
double median(std::vector<double> values);

/// D_ij = ln(N * C_ij / sum_i C_ij + 1) per observation j, where N is the
/// median observation total.
ExpressionMatrix normalize(const ExpressionMatrix& m);

/// Keeps the ceil(top_fraction * n_genes) genes with the largest population
/// variance; ties go to the smaller row index. Input order is preserved.
ExpressionMatrix select_hvg(const ExpressionMatrix& m, double top_fraction = 0.25);

/// Preprocessing settings shared by training, generation and evaluation.
struct PrepConfig {
  std::size_t min_genes_sc = 500;
  std::size_t min_genes_st = 1;
  double hvg_fraction = 0.25;
  bool normalize = true;
};

/// Row indices into the shared gene list.
struct SplitAssignment {
  std::vector<std::size_t> train_genes;
  std::vector<std::size_t> val_genes;
  std::vector<std::size_t> test_genes;
};

/// Deterministic 70/20/10 partition of [0, n_shared).
SplitAssignment split_genes(std::size_t n_shared, std::uint64_t seed);

/// Gene ids present in both matrices, in the order of `a`. Throws DataError
/// when the intersection is empty.
std::vector<std::string> shared_genes(const ExpressionMatrix& a, const ExpressionMatrix& b);

}  // namespace catgen
