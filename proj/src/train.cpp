#include "catgen/train.hpp"

#include "catgen/arplan.hpp"
#include "catgen/error.hpp"
#include "catgen/generate.hpp"
#include "catgen/granger.hpp"
#include "catgen/mask.hpp"
#include "catgen/metrics.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace catgen {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !(ae_lr > 0.0)) throw UsageError("learning rates must be positive");
  if (!(ar_decay > 0.0 && ar_decay <= 1.0)) throw UsageError("ar_decay must lie in (0, 1]");
  if (batch_genes == 0) throw UsageError("batch_genes must be positive");
  if (passes_per_epoch == 0) throw UsageError("passes_per_epoch must be positive");
  if (val_every == 0) throw UsageError("val_every must be positive");
  if (!(clip_norm > 0.0)) throw UsageError("clip_norm must be positive");
  if (lambda_rec < 0.0 || lambda_kl < 0.0) throw UsageError("loss weights must be nonnegative");
}

void Adam::step(std::vector<ad::Parameter>& params, const ad::Gradients& grads, double clip_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.trainable && grads.contains(p)) sq += grads.of(p).squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double factor = norm > clip_norm ? clip_norm / norm : 1.0;
  for (auto& p : params) {
    if (!p.trainable || !grads.contains(p)) continue;
    const ad::Matrix g = grads.of(p) * factor;
    Moments& st = state_[p.name];
    if (st.steps == 0) {
      st.m = ad::Matrix::Zero(g.rows(), g.cols());
      st.v = ad::Matrix::Zero(g.rows(), g.cols());
    }
    ++st.steps;
    st.m = beta1_ * st.m + (1.0 - beta1_) * g;
    st.v = beta2_ * st.v + (1.0 - beta2_) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(st.steps));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(st.steps));
    p.value.array() -= lr_ * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + eps_);
  }
}

namespace {

Eigen::MatrixXd st_means(const CatModel& model, const Eigen::MatrixXd& st_rows) {
  ad::Tape tape(false);
  BoundModel bound(tape, model);
  return encode(bound, tape.constant(st_rows), EncoderHead::st, false, nullptr).mean.value();
}

void check_finite(const ad::Var& loss, std::size_t step_index) {
  if (!std::isfinite(loss.value()(0, 0))) {
    throw NumericError("non-finite loss at step " + std::to_string(step_index) + " (max |activation| " +
                       std::to_string(loss.tape().max_abs_value()) + ")");
  }
}

}  // namespace

double train_step(CatModel& model, Adam& opt, const Eigen::MatrixXd& st_batch, const Eigen::MatrixXd& sc_batch,
                  const DiffusionSchedule& schedule, const TrainConfig& cfg, Rng& rng, std::size_t step_index) {
  if (st_batch.rows() != sc_batch.rows() || st_batch.rows() == 0) {
    throw UsageError("ST and SC batches must hold the same nonzero number of genes");
  }
  const auto genes = static_cast<std::size_t>(st_batch.rows());
  const auto d = static_cast<Eigen::Index>(model.config().d);

  // Diffusion targets come from the ST encoder without gradient: letting the
  // noise loss shape the target space invites collapse.
  const Eigen::MatrixXd z0 = st_means(model, st_batch) * model.latent_scale();

  ad::Tape tape;
  BoundModel m(tape, model);
  Encoded cond;
  ad::Var condition;
  if (cfg.train_sc_encoder) {
    cond = encode(m, tape.constant(sc_batch), EncoderHead::sc, cfg.variational_encoder, &rng);
    condition = cond.z;
  } else {
    ad::Tape frozen(false);
    BoundModel fm(frozen, model);
    condition = tape.constant(encode(fm, frozen.constant(sc_batch), EncoderHead::sc, cfg.variational_encoder, &rng).z.value());
  }

  const ARStepPlan plan = generate_ar_steps(genes, cfg.ar_decay, rng);
  const std::size_t n_steps = plan.steps();
  const TimestepPlan times = sample_timesteps(schedule, cfg.sampling, n_steps, 1, rng);
  const auto candidates = candidate_timesteps(schedule, cfg.sampling);

  Eigen::MatrixXd eps(static_cast<Eigen::Index>(genes), d);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
  Eigen::MatrixXd noisy(static_cast<Eigen::Index>(genes), d);
  std::vector<int> noisy_t(genes);
  for (std::size_t s = 0; s < n_steps; ++s) {
    const auto& drawn = times.per_ar_step_timesteps[s];
    // Adaptive draws can leave a late step empty; fall back to a uniform draw.
    const int t = drawn.empty() ? candidates[rng.below(candidates.size())] : drawn.front();
    const auto lo = static_cast<Eigen::Index>(plan.cs[s]);
    const auto len = static_cast<Eigen::Index>(plan.sz[s]);
    noisy.middleRows(lo, len) = forward_sample(z0.middleRows(lo, len), t, schedule, eps.middleRows(lo, len));
    for (std::size_t j = plan.cs[s]; j < plan.cs[s + 1]; ++j) noisy_t[j] = t;
  }
  const auto v = static_cast<Eigen::Index>(plan.cs[n_steps - 1]);
  const AttentionMask mask = build_mask(genes, genes, plan);

  TokenInputs in;
  in.condition = condition;
  in.clean = tape.constant(z0.topRows(v));
  in.noisy = tape.constant(noisy);
  in.noisy_alpha_bars.resize(genes);
  for (std::size_t j = 0; j < genes; ++j) in.noisy_alpha_bars[j] = schedule.alpha_bar(noisy_t[j]);
  in.noisy_timesteps = std::move(noisy_t);
  in.clean_pair.resize(static_cast<std::size_t>(v));
  std::iota(in.clean_pair.begin(), in.clean_pair.end(), Eigen::Index{0});
  in.noisy_pair.resize(genes);
  std::iota(in.noisy_pair.begin(), in.noisy_pair.end(), Eigen::Index{0});

  ad::Var loss = ad::mse(cat_forward(m, in, mask), tape.constant(eps));
  if (cfg.variational_encoder && cfg.train_sc_encoder) {
    loss = ad::add(loss, ad::scale(kl_divergence(cond), cfg.lambda_kl));
  }
  if (cfg.train_decoder) {
    const Encoded enc = encode(m, tape.constant(st_batch), EncoderHead::st, cfg.variational_encoder, &rng);
    ad::Var rec = ad::mse(decode(m, enc.z), tape.constant(st_batch));
    loss = ad::add(loss, ad::scale(rec, cfg.lambda_rec));
    if (cfg.variational_encoder) loss = ad::add(loss, ad::scale(kl_divergence(enc), cfg.lambda_kl));
  }
  check_finite(loss, step_index);
  const ad::Gradients grads = tape.backward(loss);
  opt.step(model.parameters(), grads, cfg.clip_norm);
  return loss.value()(0, 0);
}

double autoencoder_step(CatModel& model, Adam& opt, const Eigen::MatrixXd& st_batch, const Eigen::MatrixXd& sc_batch,
                        const TrainConfig& cfg, Rng& rng) {
  if (st_batch.rows() != sc_batch.rows()) throw UsageError("ST and SC batches must hold the same genes");
  ad::Tape tape;
  BoundModel m(tape, model);
  const Encoded enc = encode(m, tape.constant(st_batch), EncoderHead::st, cfg.variational_encoder, &rng);
  const Encoded cond = encode(m, tape.constant(sc_batch), EncoderHead::sc, false, nullptr);
  ad::Var loss = ad::mse(decode(m, enc.z), tape.constant(st_batch));
  // Scale-free alignment: the ST latent scale is still settling here.
  const double target_power = enc.mean.value().squaredNorm() / static_cast<double>(enc.mean.value().size());
  if (target_power > 0.0) {
    loss = ad::add(loss, ad::scale(ad::mse(cond.mean, tape.constant(enc.mean.value())), 1.0 / target_power));
  }
  if (cfg.variational_encoder) loss = ad::add(loss, ad::scale(kl_divergence(enc), cfg.lambda_kl));
  check_finite(loss, 0);
  opt.step(model.parameters(), tape.backward(loss), cfg.clip_norm);
  return loss.value()(0, 0);
}

void calibrate_latent_scale(CatModel& model, const Eigen::MatrixXd& st_rows) {
  const Eigen::MatrixXd z = st_means(model, st_rows);
  const double rms = std::sqrt(z.squaredNorm() / static_cast<double>(z.size()));
  if (!(rms > 0.0) || !std::isfinite(rms)) throw NumericError("ST latents are degenerate; cannot set latent scale");
  model.set_latent_scale(1.0 / rms);
  model.set_latent_bound(1.5 * z.cwiseAbs().maxCoeff() / rms);
}

double validation_pcc(const CatModel& model, const Eigen::MatrixXd& st_rows, const Eigen::MatrixXd& sc_rows,
                      const DiffusionSchedule& schedule, const SamplingStrategy& sampling, std::uint64_t seed,
                      std::size_t batch_genes) {
  GenerateOptions opts;
  opts.sampling = sampling;
  opts.seed = seed;
  opts.batch_genes = batch_genes;
  const Eigen::MatrixXd latents = generate_latents(model, sc_rows, schedule, opts);
  ad::Tape tape(false);
  BoundModel bound(tape, model);
  const Eigen::MatrixXd pred = decode(bound, tape.constant(latents / model.latent_scale())).value().cwiseMax(0.0);
  double total = 0.0;
  for (Eigen::Index g = 0; g < pred.rows(); ++g) {
    const Eigen::VectorXd p = pred.row(g).transpose();
    const Eigen::VectorXd t = st_rows.row(g).transpose();
    if (p.maxCoeff() == p.minCoeff()) continue;  // flat prediction counts as 0
    total += pcc(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                 std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
  }
  return total / static_cast<double>(pred.rows());
}

FitResult fit(const FitData& data, const CatConfig& arch, const DiffusionSchedule& schedule, const TrainConfig& cfg) {
  cfg.validate();
  const auto n_train = static_cast<std::size_t>(data.st_train.rows());
  if (n_train == 0 || data.sc_train.rows() != data.st_train.rows()) {
    throw DataError("training data must hold the same nonzero number of ST and SC genes");
  }
  const bool has_val = data.st_val.rows() > 0;
  if (has_val && data.sc_val.rows() != data.st_val.rows()) throw DataError("validation ST/SC rows differ");

  FitResult result{CatModel(arch, cfg.seed), {}, std::numeric_limits<double>::quiet_NaN()};
  if (cfg.epochs == 0) return result;
  CatModel& model = result.model;
  CatModel working = model;
  Rng rng = Rng::stream(cfg.seed, 1);

  Adam ae(cfg.ae_lr);
  for (std::size_t i = 0; i < cfg.ae_epochs; ++i) autoencoder_step(working, ae, data.st_train, data.sc_train, cfg, rng);
  calibrate_latent_scale(working, data.st_train);
  spdlog::debug("autoencoder warm-up done, latent scale {:.4g}", working.latent_scale());

  std::vector<double> order_score;
  if (cfg.gene_order == GeneOrder::granger) order_score = granger_out_scores(data.st_train, 1, cfg.threads);

  Adam opt(cfg.lr);
  std::vector<std::size_t> genes(n_train);
  std::iota(genes.begin(), genes.end(), std::size_t{0});
  std::size_t step = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t pass = 0; pass < cfg.passes_per_epoch; ++pass) {
      rng.shuffle(genes);
      for (std::size_t start = 0; start < n_train; start += cfg.batch_genes) {
        std::vector<std::size_t> batch(genes.begin() + static_cast<std::ptrdiff_t>(start),
                                       genes.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, start + cfg.batch_genes)));
        if (!order_score.empty()) {
          std::stable_sort(batch.begin(), batch.end(),
                           [&](std::size_t a, std::size_t b) { return order_score[a] > order_score[b]; });
        }
        Eigen::MatrixXd st(static_cast<Eigen::Index>(batch.size()), data.st_train.cols());
        Eigen::MatrixXd sc(static_cast<Eigen::Index>(batch.size()), data.sc_train.cols());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          st.row(static_cast<Eigen::Index>(i)) = data.st_train.row(static_cast<Eigen::Index>(batch[i]));
          sc.row(static_cast<Eigen::Index>(i)) = data.sc_train.row(static_cast<Eigen::Index>(batch[i]));
        }
        loss_sum += train_step(working, opt, st, sc, schedule, cfg, rng, step++);
        ++batches;
      }
    }
    HistoryRow row{epoch, loss_sum / static_cast<double>(batches), std::numeric_limits<double>::quiet_NaN()};
    if (has_val && (epoch % cfg.val_every == 0 || epoch == cfg.epochs)) {
      row.val_pcc = validation_pcc(working, data.st_val, data.sc_val, schedule, cfg.sampling, cfg.seed,
                                   cfg.batch_genes);
      if (row.val_pcc > best) {
        best = row.val_pcc;
        model = working;
      }
      spdlog::info("epoch {} loss {:.5f} val_pcc {:.4f}", epoch, row.train_loss, row.val_pcc);
    } else {
      spdlog::debug("epoch {} loss {:.5f}", epoch, row.train_loss);
    }
    result.history.push_back(row);
  }
  if (!has_val) {
    model = working;
  } else {
    result.best_val_pcc = best;
  }
  return result;
}

void write_history_csv(const std::vector<HistoryRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  char buf[64];
  auto num = [&](double v) {
    if (std::isnan(v)) return std::string();
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  out << "epoch,train_loss,val_pcc\n";
  for (const auto& r : rows) out << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_pcc) << '\n';
}

}  // namespace catgen
