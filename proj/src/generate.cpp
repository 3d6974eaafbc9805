#include "catgen/generate.hpp"

#include "catgen/error.hpp"
#include "catgen/mask.hpp"

#include <cmath>

namespace catgen {

Eigen::MatrixXd reverse_step(const Eigen::MatrixXd& xt, int t, const Eigen::MatrixXd& eps_hat,
                             const DiffusionSchedule& schedule, Rng& rng) {
  if (t < 1 || t > schedule.T()) throw UsageError("reverse_step: timestep " + std::to_string(t) + " out of range");
  if (xt.rows() != eps_hat.rows() || xt.cols() != eps_hat.cols()) {
    throw UsageError("reverse_step: noise prediction shape does not match latents");
  }
  const double beta = schedule.beta(t);
  if (beta == 0.0) return xt;
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t - 1);
  Eigen::MatrixXd mu = (xt - (beta / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(1.0 - beta);
  if (t == 1) return mu;
  const double sd = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
  for (Eigen::Index i = 0; i < mu.size(); ++i) mu.data()[i] += sd * rng.normal();
  return mu;
}

Eigen::MatrixXd clipped_reverse_step(const Eigen::MatrixXd& xt, int t, const Eigen::MatrixXd& eps_hat,
                                     const DiffusionSchedule& schedule, double bound, Rng& rng) {
  if (!(bound > 0.0)) throw UsageError("clip bound must be positive");
  if (t < 1 || t > schedule.T()) throw UsageError("reverse_step: timestep " + std::to_string(t) + " out of range");
  const double ab = schedule.alpha_bar(t);
  const Eigen::MatrixXd x0 = (xt - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
  const Eigen::MatrixXd clamped = x0.cwiseMax(-bound).cwiseMin(bound);
  if (clamped == x0) return reverse_step(xt, t, eps_hat, schedule, rng);
  return reverse_step(xt, t, (xt - std::sqrt(ab) * clamped) / std::sqrt(1.0 - ab), schedule, rng);
}

namespace {

// Denoises one chunk group-by-group. Earlier groups, once finished, are fed as
// clean tokens to later groups.
Eigen::MatrixXd denoise_chunk(const CatModel& model, const Eigen::MatrixXd& conditions,
                              const DiffusionSchedule& schedule, const GenerateOptions& opts,
                              std::uint64_t chunk_index) {
  const auto s = static_cast<std::size_t>(conditions.rows());
  const auto d = conditions.cols();
  const ARStepPlan plan = ARStepPlan::equal_groups(s, std::min(opts.ar_groups, s));
  const AttentionMask mask = build_mask(s, s, plan);
  const std::size_t n = plan.steps();
  const auto v = static_cast<Eigen::Index>(plan.cs[n - 1]);

  Eigen::MatrixXd finished = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s), d);
  for (std::size_t g = 0; g < n; ++g) {
    Rng rng = Rng::stream(opts.seed, chunk_index * 1024 + g);
    const auto lo = static_cast<Eigen::Index>(plan.cs[g]);
    const auto width = static_cast<Eigen::Index>(plan.sz[g]);

    const std::vector<int> grid = inference_timesteps(schedule, opts.sampling, g);
    const DiffusionSchedule spaced = schedule.respaced(grid);

    Eigen::MatrixXd x(width, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();

    // Slots of later groups stay zero; the mask hides them from this group.
    Eigen::MatrixXd noisy = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s), d);
    for (int k = static_cast<int>(grid.size()); k >= 1; --k) {
      noisy.middleRows(lo, width) = x;
      std::vector<int> times(s, grid[static_cast<std::size_t>(k - 1)]);
      std::vector<double> levels(s, spaced.alpha_bar(k));
      TokenBatch batch =
          TokenBatch::aligned(conditions, finished.topRows(v), noisy, std::move(times), std::move(levels), plan);
      const Eigen::MatrixXd eps = cat_forward(model, batch, mask);
      x = clipped_reverse_step(x, k, eps.middleRows(lo, width), spaced, model.latent_bound(), rng);
    }
    finished.middleRows(lo, width) = x;
  }
  return finished;
}

}  // namespace

Eigen::MatrixXd generate_latents(const CatModel& model, const Eigen::MatrixXd& sc_rows,
                                 const DiffusionSchedule& schedule, const GenerateOptions& opts) {
  if (opts.batch_genes == 0 || opts.ar_groups == 0) throw UsageError("batch size and AR groups must be positive");
  const auto genes = sc_rows.rows();
  const auto d = static_cast<Eigen::Index>(model.config().d);

  ad::Tape tape(false);
  BoundModel bound(tape, model);
  const Eigen::MatrixXd conditions =
      encode(bound, tape.constant(sc_rows), EncoderHead::sc, false, nullptr).mean.value();

  Eigen::MatrixXd out(genes, d);
  const auto chunk = static_cast<Eigen::Index>(opts.batch_genes);
  for (Eigen::Index start = 0, idx = 0; start < genes; start += chunk, ++idx) {
    const Eigen::Index len = std::min(chunk, genes - start);
    out.middleRows(start, len) =
        denoise_chunk(model, conditions.middleRows(start, len), schedule, opts, static_cast<std::uint64_t>(idx));
  }
  return out;
}

ExpressionMatrix generate_genes(const ExpressionMatrix& sc, const std::vector<std::string>& target_genes,
                                const CatModel& model, const DiffusionSchedule& schedule,
                                const GenerateOptions& opts, const std::vector<std::string>& spot_ids) {
  if (spot_ids.size() != model.config().st_dim) throw DataError("spot labels do not match the model's ST width");
  if (static_cast<std::size_t>(sc.values.cols()) != model.config().sc_dim) {
    throw DataError("SC matrix has " + std::to_string(sc.values.cols()) + " cells; the model expects " +
                    std::to_string(model.config().sc_dim));
  }
  if (target_genes.empty()) throw UsageError("no target genes requested");
  const ExpressionMatrix rows = sc.select_genes(target_genes);
  const Eigen::MatrixXd latents = generate_latents(model, rows.values, schedule, opts);

  ad::Tape tape(false);
  BoundModel bound(tape, model);
  Eigen::MatrixXd decoded = decode(bound, tape.constant(latents / model.latent_scale())).value();
  decoded = decoded.cwiseMax(0.0);

  ExpressionMatrix out;
  out.gene_ids = target_genes;
  out.obs_ids = spot_ids;
  out.values = std::move(decoded);
  out.modality = Modality::ST;
  return out;
}

}  // namespace catgen
