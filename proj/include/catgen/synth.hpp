#pragma once

#include "catgen/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace catgen {

/// One planted lagged dependency: target_t += coefficient * driver_{t-lag}.
struct ChainEdge {
  std::size_t driver = 0;
  std::size_t target = 0;
  double coefficient = 0.9;
  std::size_t lag = 1;
};

struct SynthConfig {
  std::size_t n_genes = 32;
  std::size_t n_spots = 16;
  std::size_t n_cells = 64;
  std::vector<ChainEdge> chain_edges;
  double noise_sd = 0.05;
  double dropout_rate = 0.0;
  /// Rank of the gene-level factor model shared by both modalities.
  std::size_t n_factors = 6;
  std::uint64_t seed = 42;
};

struct PlantedEdge {
  std::string driver;
  std::string target;
  double coefficient;
  std::size_t lag;
};

struct SynthData {
  ExpressionMatrix st;
  ExpressionMatrix sc;
  std::vector<PlantedEdge> edges;
};

/// Disjoint chains g0 -> g1 -> ... of `chain_length` genes each, starting at
/// gene 0 and packed consecutively.
std::vector<ChainEdge> planted_chains(std::size_t n_chains, std::size_t chain_length,
                                      double coefficient = 0.9, std::size_t lag = 1);

/// Paired ST/SC matrices from a shared gene factor model. Root genes follow
/// the factor model; every target gene is the lagged sum of its drivers (across
/// the observation index) in both modalities. Gaussian noise is added, each
/// matrix is shifted by its global minimum and clamped at zero, then entries
/// are zeroed independently with probability dropout_rate.
SynthData generate_synth(const SynthConfig& cfg);

/// Writes st.csv, sc.csv and edges.csv into `dir`.
void write_synth(const SynthData& data, const std::filesystem::path& dir);

}  // namespace catgen
