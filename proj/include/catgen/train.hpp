#pragma once

#include "catgen/diffusion.hpp"
#include "catgen/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace catgen {

enum class GeneOrder { random, granger };

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_genes = 8;
  std::size_t passes_per_epoch = 8;  // shuffled sweeps over the training genes per epoch
  std::size_t ae_epochs = 400;       // encoder/decoder warm-up steps before diffusion training
  double lr = 1e-3;
  double ae_lr = 3e-3;
  double ar_decay = 0.8;
  bool train_decoder = false;
  bool variational_encoder = true;
  bool train_sc_encoder = false;  // keep updating e2 from the noise loss after warm-up
  SamplingStrategy sampling;
  std::uint64_t seed = 42;
  std::size_t val_every = 25;
  GeneOrder gene_order = GeneOrder::random;
  double lambda_rec = 1.0;
  double lambda_kl = 1e-4;
  double clip_norm = 1.0;
  std::size_t threads = 0;

  void validate() const;
};

/// Adam with per-parameter step counts; parameters without a gradient in a
/// step are left untouched.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::vector<ad::Parameter>& params, const ad::Gradients& grads, double clip_norm);

 private:
  struct Moments {
    ad::Matrix m, v;
    long steps = 0;
  };
  double lr_, beta1_, beta2_, eps_;
  std::map<std::string, Moments> state_;
};

/// One optimizer update on a gene batch (rows aligned across `st_batch` and
/// `sc_batch`). Returns the total loss. Throws NumericError with the step
/// index on a non-finite loss.
double train_step(CatModel& model, Adam& opt, const Eigen::MatrixXd& st_batch, const Eigen::MatrixXd& sc_batch,
                  const DiffusionSchedule& schedule, const TrainConfig& cfg, Rng& rng, std::size_t step_index);

/// One warm-up update: ST reconstruction through e1 and the decoder, plus
/// regression of the SC encoder means onto the (detached) ST encoder means of
/// the same genes. Returns the loss.
double autoencoder_step(CatModel& model, Adam& opt, const Eigen::MatrixXd& st_batch, const Eigen::MatrixXd& sc_batch,
                        const TrainConfig& cfg, Rng& rng);

/// Sets latent_scale so the ST encoder means have unit standard deviation.
void calibrate_latent_scale(CatModel& model, const Eigen::MatrixXd& st_rows);

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_pcc = 0.0;  // NaN when validation was not run this epoch
};

struct FitData {
  Eigen::MatrixXd st_train, sc_train;  // genes x p, genes x q
  Eigen::MatrixXd st_val, sc_val;      // may be empty
};

struct FitResult {
  CatModel model;  // best-validation parameters
  std::vector<HistoryRow> history;
  double best_val_pcc = 0.0;
};

FitResult fit(const FitData& data, const CatConfig& arch, const DiffusionSchedule& schedule, const TrainConfig& cfg);

/// Mean per-gene PCC between generated and true ST rows.
double validation_pcc(const CatModel& model, const Eigen::MatrixXd& st_rows, const Eigen::MatrixXd& sc_rows,
                      const DiffusionSchedule& schedule, const SamplingStrategy& sampling, std::uint64_t seed,
                      std::size_t batch_genes);

void write_history_csv(const std::vector<HistoryRow>& rows, const std::filesystem::path& path);

}  // namespace catgen
