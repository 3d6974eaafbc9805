#pragma once

#include "catgen/data.hpp"
#include "catgen/diffusion.hpp"
#include "catgen/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace catgen {

/// Everything generation needs from a training run.
struct Checkpoint {
  CatModel model;
  std::vector<double> betas;  // diffusion schedule used in training
  SamplingStrategy sampling;
  bool variational = true;
  std::vector<std::string> spot_ids;  // column labels of generated ST profiles
  PrepConfig prep;                    // preprocessing applied to the training inputs

  DiffusionSchedule schedule() const { return DiffusionSchedule::from_betas(betas); }
};

/// Binary layout: "CATG", u32 version, u32 tensor count, then per tensor
/// u32 name length, name bytes, u32 ndim, u64 dims, f64 values (column-major),
/// all little-endian. The file is written to a temporary sibling and renamed.
void write_tensors(const std::vector<ad::Parameter>& tensors, const std::filesystem::path& path);
std::vector<ad::Parameter> read_tensors(const std::filesystem::path& path);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace catgen
