#include "catgen/data.hpp"

#include "catgen/error.hpp"
#include "catgen/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace catgen {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

void check_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      throw DataError(std::string("duplicate ") + what + " id '" + id + "'");
    }
  }
}

}  // namespace

void ExpressionMatrix::validate() const {
  if (static_cast<std::size_t>(values.rows()) != gene_ids.size() ||
      static_cast<std::size_t>(values.cols()) != obs_ids.size()) {
    throw DataError("expression matrix shape does not match its identifiers");
  }
  check_unique(gene_ids, "gene");
  check_unique(obs_ids, "observation");
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      const double v = values(i, j);
      if (!std::isfinite(v)) throw DataError("non-finite expression value");
      if (v < 0.0) throw DataError("negative expression value for gene '" + gene_ids[i] + "'");
    }
  }
}

std::size_t ExpressionMatrix::gene_index(const std::string& id) const {
  auto it = std::find(gene_ids.begin(), gene_ids.end(), id);
  if (it == gene_ids.end()) throw DataError("unknown gene '" + id + "'");
  return static_cast<std::size_t>(it - gene_ids.begin());
}

ExpressionMatrix ExpressionMatrix::select_genes(const std::vector<std::size_t>& rows) const {
  ExpressionMatrix out;
  out.obs_ids = obs_ids;
  out.modality = modality;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.gene_ids.push_back(gene_ids.at(rows[r]));
    out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

ExpressionMatrix ExpressionMatrix::select_genes(const std::vector<std::string>& ids) const {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) rows.push_back(gene_index(id));
  return select_genes(rows);
}

ExpressionMatrix load_matrix(const std::filesystem::path& path, TableFormat format,
                             Modality modality) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const char sep = format == TableFormat::csv ? ',' : '\t';

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
  auto header = split_line(line, sep);
  if (header.size() < 2) throw DataError("header must name at least one observation");

  ExpressionMatrix m;
  m.modality = modality;
  for (std::size_t k = 1; k < header.size(); ++k) m.obs_ids.push_back(strip(header[k]));

  std::vector<double> flat;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (strip(line).empty()) continue;
    auto fields = split_line(line, sep);
    if (fields.size() != header.size()) {
      throw DataError("ragged row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    m.gene_ids.push_back(strip(fields[0]));
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const std::string cell = strip(fields[k]);
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last) {
        throw DataError("non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                        ", column " + std::to_string(k + 1));
      }
      flat.push_back(v);
    }
  }

  const auto n_genes = static_cast<Eigen::Index>(m.gene_ids.size());
  const auto n_obs = static_cast<Eigen::Index>(m.obs_ids.size());
  m.values.resize(n_genes, n_obs);
  for (Eigen::Index i = 0; i < n_genes; ++i) {
    for (Eigen::Index j = 0; j < n_obs; ++j) m.values(i, j) = flat[static_cast<std::size_t>(i * n_obs + j)];
  }
  m.validate();
  return m;
}

void save_matrix(const ExpressionMatrix& m, const std::filesystem::path& path, TableFormat format) {
  const char sep = format == TableFormat::csv ? ',' : '\t';
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "gene_id";
  for (const auto& id : m.obs_ids) out << sep << id;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < m.gene_ids.size(); ++i) {
    out << m.gene_ids[i];
    for (std::size_t j = 0; j < m.obs_ids.size(); ++j) {
      auto res = std::to_chars(buf, buf + sizeof buf,
                               m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      out << sep << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

ExpressionMatrix qc_filter(const ExpressionMatrix& m, std::size_t min_genes_sc, std::size_t min_genes_st) {
  const std::size_t threshold = m.modality == Modality::SC ? min_genes_sc : min_genes_st;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
    const auto detected = static_cast<std::size_t>((m.values.col(j).array() > 0.0).count());
    if (detected >= threshold) keep.push_back(j);
  }
  if (keep.empty()) throw DataError("quality control removed every observation");

  ExpressionMatrix out;
  out.gene_ids = m.gene_ids;
  out.modality = m.modality;
  out.values.resize(m.values.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.obs_ids.push_back(m.obs_ids[static_cast<std::size_t>(keep[k])]);
    out.values.col(static_cast<Eigen::Index>(k)) = m.values.col(keep[k]);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ExpressionMatrix normalize(const ExpressionMatrix& m) {
  const Eigen::RowVectorXd totals = m.values.colwise().sum();
  for (Eigen::Index j = 0; j < totals.size(); ++j) {
    if (!(totals(j) > 0.0)) {
      throw DataError("observation '" + m.obs_ids[static_cast<std::size_t>(j)] +
                      "' has zero total count; run quality control first");
    }
  }
  const double scale = median(std::vector<double>(totals.data(), totals.data() + totals.size()));

  ExpressionMatrix out = m;
  for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
      out.values(i, j) = std::log1p(scale * m.values(i, j) / totals(j));
    }
  }
  return out;
}

ExpressionMatrix select_hvg(const ExpressionMatrix& m, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw UsageError("HVG fraction must lie in (0, 1]");
  }
  const std::size_t n = m.n_genes();
  const auto keep = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n) - 1e-12));

  std::vector<double> variance(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = m.values.row(static_cast<Eigen::Index>(i)).array();
    variance[i] = (row - row.mean()).square().mean();
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return variance[a] > variance[b]; });
  order.resize(std::min(keep, n));
  std::sort(order.begin(), order.end());
  return m.select_genes(order);
}

SplitAssignment split_genes(std::size_t n_shared, std::uint64_t seed) {
  if (n_shared < 10) throw DataError("need at least 10 shared genes to split, got " + std::to_string(n_shared));
  std::vector<std::size_t> order(n_shared);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const double n = static_cast<double>(n_shared);
  const auto n_test = static_cast<std::size_t>(std::llround(0.1 * n));
  const auto n_val = static_cast<std::size_t>(std::llround(0.2 * n));

  SplitAssignment split;
  split.train_genes.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val + n_test));
  split.val_genes.assign(order.end() - static_cast<std::ptrdiff_t>(n_val + n_test),
                         order.end() - static_cast<std::ptrdiff_t>(n_test));
  split.test_genes.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(split.train_genes.begin(), split.train_genes.end());
  std::sort(split.val_genes.begin(), split.val_genes.end());
  std::sort(split.test_genes.begin(), split.test_genes.end());
  return split;
}

std::vector<std::string> shared_genes(const ExpressionMatrix& a, const ExpressionMatrix& b) {
  std::unordered_set<std::string> in_b(b.gene_ids.begin(), b.gene_ids.end());
  std::vector<std::string> out;
  for (const auto& id : a.gene_ids) {
    if (in_b.count(id)) out.push_back(id);
  }
  if (out.empty()) throw DataError("spatial and single-cell matrices share no genes");
  return out;
}

}  // namespace catgen
