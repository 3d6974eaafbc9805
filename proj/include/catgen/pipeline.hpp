#pragma once

#include "catgen/config.hpp"
#include "catgen/data.hpp"
#include "catgen/diffusion.hpp"
#include "catgen/model.hpp"
#include "catgen/synth.hpp"
#include "catgen/train.hpp"

#include <cstdint>

namespace catgen {

/// Shared-gene ST/SC matrices (rows in the same gene order) and their split.
struct PreparedData {
  ExpressionMatrix st;
  ExpressionMatrix sc;
  SplitAssignment split;
};

/// QC, normalization and HVG selection per modality, then intersection of the
/// surviving genes and the 70/20/10 split.
PreparedData prepare_dataset(const ExpressionMatrix& st_raw, const ExpressionMatrix& sc_raw, const PrepConfig& cfg,
                             std::uint64_t seed);

/// QC and normalization only (no gene selection), as applied before
/// generation or evaluation.
ExpressionMatrix preprocess(const ExpressionMatrix& raw, const PrepConfig& cfg);

FitData make_fit_data(const PreparedData& data);

/// Preprocessing settings suited to synthetic data, which has few genes and
/// no count-like sparsity: every gene is kept and any cell passes QC.
PrepConfig synth_prep_config();

PrepConfig prep_config_from(const Config& c, const PrepConfig& base = {});
CatConfig cat_config_from(const Config& c, std::size_t st_dim, std::size_t sc_dim);
TrainConfig train_config_from(const Config& c, std::uint64_t seed);
DiffusionSchedule schedule_from(const Config& c);
SynthConfig synth_config_from(const Config& c, std::uint64_t seed);

}  // namespace catgen
