#include "catgen/synth.hpp"

#include "catgen/error.hpp"
#include "catgen/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace catgen {

namespace {

std::string padded(const char* prefix, std::size_t i, std::size_t n) {
  const int width = n > 1 ? static_cast<int>(std::to_string(n - 1).size()) : 1;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

std::vector<std::size_t> topological_order(std::size_t n, const std::vector<ChainEdge>& edges) {
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& e : edges) {
    if (e.driver >= n || e.target >= n) throw UsageError("chain edge references a gene out of range");
    if (e.lag < 1) throw UsageError("chain edge lag must be at least 1");
    if (e.driver == e.target) throw UsageError("chain edges must be acyclic (self-loop)");
    out[e.driver].push_back(e.target);
    ++indegree[e.target];
  }
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t i = n; i > 0; --i) {
    if (indegree[i - 1] == 0) ready.push_back(i - 1);
  }
  while (!ready.empty()) {
    const std::size_t g = ready.back();
    ready.pop_back();
    order.push_back(g);
    for (std::size_t t : out[g]) {
      if (--indegree[t] == 0) ready.push_back(t);
    }
  }
  if (order.size() != n) throw UsageError("chain edges must be acyclic");
  return order;
}

Eigen::MatrixXd simulate(const Eigen::MatrixXd& factors, std::size_t n_obs, const SynthConfig& cfg,
                         const std::vector<std::size_t>& order, Rng& rng) {
  const auto k = factors.cols();
  const auto n_genes = factors.rows();
  Eigen::MatrixXd loadings(k, static_cast<Eigen::Index>(n_obs));
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (Eigen::Index j = 0; j < loadings.cols(); ++j) {
    for (Eigen::Index r = 0; r < k; ++r) loadings(r, j) = rng.normal() * scale;
  }
  Eigen::MatrixXd base = factors * loadings;

  std::vector<bool> is_target(static_cast<std::size_t>(n_genes), false);
  for (const auto& e : cfg.chain_edges) is_target[e.target] = true;

  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n_genes, static_cast<Eigen::Index>(n_obs));
  for (std::size_t g : order) {
    const auto row = static_cast<Eigen::Index>(g);
    if (!is_target[g]) {
      values.row(row) = base.row(row);
      continue;
    }
    for (const auto& e : cfg.chain_edges) {
      if (e.target != g) continue;
      const auto lag = static_cast<Eigen::Index>(e.lag);
      for (Eigen::Index t = lag; t < values.cols(); ++t) {
        values(row, t) += e.coefficient * values(static_cast<Eigen::Index>(e.driver), t - lag);
      }
    }
  }
  // Noise is added after propagation: a target is an exact lagged copy of its
  // drivers up to its own noise term.
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) values(i, j) += cfg.noise_sd * rng.normal();
  }
  values.array() -= values.minCoeff();
  values = values.cwiseMax(0.0);
  if (cfg.dropout_rate > 0.0) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      for (Eigen::Index i = 0; i < values.rows(); ++i) {
        if (rng.uniform() < cfg.dropout_rate) values(i, j) = 0.0;
      }
    }
  }
  return values;
}

}  // namespace

std::vector<ChainEdge> planted_chains(std::size_t n_chains, std::size_t chain_length, double coefficient,
                                      std::size_t lag) {
  std::vector<ChainEdge> edges;
  for (std::size_t c = 0; c < n_chains; ++c) {
    const std::size_t start = c * chain_length;
    for (std::size_t k = 0; k + 1 < chain_length; ++k) {
      edges.push_back({start + k, start + k + 1, coefficient, lag});
    }
  }
  return edges;
}

SynthData generate_synth(const SynthConfig& cfg) {
  if (cfg.n_genes < 1 || cfg.n_spots < 1 || cfg.n_cells < 1 || cfg.n_factors < 1) {
    throw UsageError("synthetic dimensions must be positive");
  }
  if (!(cfg.noise_sd > 0.0)) throw UsageError("noise_sd must be positive");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) throw UsageError("dropout_rate must lie in [0, 1)");
  const auto order = topological_order(cfg.n_genes, cfg.chain_edges);

  Rng rng(cfg.seed);
  Eigen::MatrixXd factors(static_cast<Eigen::Index>(cfg.n_genes), static_cast<Eigen::Index>(cfg.n_factors));
  for (Eigen::Index i = 0; i < factors.rows(); ++i) {
    for (Eigen::Index r = 0; r < factors.cols(); ++r) factors(i, r) = rng.normal();
  }

  SynthData data;
  for (std::size_t g = 0; g < cfg.n_genes; ++g) data.st.gene_ids.push_back(padded("G", g, cfg.n_genes));
  data.sc.gene_ids = data.st.gene_ids;
  for (std::size_t j = 0; j < cfg.n_spots; ++j) data.st.obs_ids.push_back(padded("spot", j, cfg.n_spots));
  for (std::size_t j = 0; j < cfg.n_cells; ++j) data.sc.obs_ids.push_back(padded("cell", j, cfg.n_cells));
  data.st.modality = Modality::ST;
  data.sc.modality = Modality::SC;

  Rng st_rng = Rng::stream(cfg.seed, 1);
  Rng sc_rng = Rng::stream(cfg.seed, 2);
  data.st.values = simulate(factors, cfg.n_spots, cfg, order, st_rng);
  data.sc.values = simulate(factors, cfg.n_cells, cfg, order, sc_rng);

  for (const auto& e : cfg.chain_edges) {
    data.edges.push_back({data.st.gene_ids[e.driver], data.st.gene_ids[e.target], e.coefficient, e.lag});
  }
  return data;
}

void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_matrix(data.st, dir / "st.csv");
  save_matrix(data.sc, dir / "sc.csv");
  std::ofstream out(dir / "edges.csv", std::ios::binary);
  if (!out) throw DataError("cannot write edges.csv in '" + dir.string() + "'");
  out << "driver,target,coefficient,lag\n";
  char buf[64];
  for (const auto& e : data.edges) {
    auto res = std::to_chars(buf, buf + sizeof buf, e.coefficient);
    out << e.driver << ',' << e.target << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
        << ',' << e.lag << '\n';
  }
}

}  // namespace catgen
