#include "catgen/pipeline.hpp"

#include "catgen/error.hpp"

#include <spdlog/spdlog.h>

namespace catgen {

ExpressionMatrix preprocess(const ExpressionMatrix& raw, const PrepConfig& cfg) {
  ExpressionMatrix m = qc_filter(raw, cfg.min_genes_sc, cfg.min_genes_st);
  return cfg.normalize ? normalize(m) : m;
}

PreparedData prepare_dataset(const ExpressionMatrix& st_raw, const ExpressionMatrix& sc_raw, const PrepConfig& cfg,
                             std::uint64_t seed) {
  const ExpressionMatrix st = select_hvg(preprocess(st_raw, cfg), cfg.hvg_fraction);
  const ExpressionMatrix sc = select_hvg(preprocess(sc_raw, cfg), cfg.hvg_fraction);
  const std::vector<std::string> genes = shared_genes(st, sc);
  spdlog::info("prepared {} shared genes over {} spots and {} cells", genes.size(), st.n_obs(), sc.n_obs());
  PreparedData out;
  out.st = st.select_genes(genes);
  out.sc = sc.select_genes(genes);
  out.split = split_genes(genes.size(), seed);
  return out;
}

FitData make_fit_data(const PreparedData& data) {
  auto rows = [](const ExpressionMatrix& m, const std::vector<std::size_t>& idx) {
    return m.select_genes(idx).values;
  };
  FitData fd;
  fd.st_train = rows(data.st, data.split.train_genes);
  fd.sc_train = rows(data.sc, data.split.train_genes);
  fd.st_val = rows(data.st, data.split.val_genes);
  fd.sc_val = rows(data.sc, data.split.val_genes);
  return fd;
}

PrepConfig synth_prep_config() {
  PrepConfig p;
  p.min_genes_sc = 1;
  p.hvg_fraction = 1.0;
  return p;
}

PrepConfig prep_config_from(const Config& c, const PrepConfig& base) {
  PrepConfig p = base;
  p.min_genes_sc = c.get_count("data.min_genes_sc", p.min_genes_sc);
  p.min_genes_st = c.get_count("data.min_genes_st", p.min_genes_st);
  p.hvg_fraction = c.get_real("data.hvg_fraction", p.hvg_fraction);
  p.normalize = c.get_flag("data.normalize", p.normalize);
  return p;
}

CatConfig cat_config_from(const Config& c, std::size_t st_dim, std::size_t sc_dim) {
  CatConfig m;
  m.st_dim = st_dim;
  m.sc_dim = sc_dim;
  m.d = c.get_count("model.d", m.d);
  m.heads = c.get_count("model.heads", m.heads);
  m.blocks = c.get_count("model.blocks", m.blocks);
  m.ffn_mult = c.get_count("model.ffn_mult", m.ffn_mult);
  m.enc_hidden = c.get_count("model.enc_hidden", m.enc_hidden);
  m.validate();
  return m;
}

TrainConfig train_config_from(const Config& c, std::uint64_t seed) {
  TrainConfig t;
  t.seed = seed;
  t.epochs = c.get_count("train.epochs", t.epochs);
  t.batch_genes = c.get_count("train.batch_genes", t.batch_genes);
  t.passes_per_epoch = c.get_count("train.passes_per_epoch", t.passes_per_epoch);
  t.ae_epochs = c.get_count("train.ae_epochs", t.ae_epochs);
  t.lr = c.get_real("train.lr", t.lr);
  t.ae_lr = c.get_real("train.ae_lr", t.ae_lr);
  t.ar_decay = c.get_real("ar.decay", t.ar_decay);
  t.train_decoder = c.get_flag("train.train_decoder", t.train_decoder);
  t.variational_encoder = c.get_flag("model.variational", t.variational_encoder);
  t.train_sc_encoder = c.get_flag("train.train_sc_encoder", t.train_sc_encoder);
  t.sampling = SamplingStrategy::parse(c.get_string("diffusion.sampling", "full"), t.ar_decay);
  t.val_every = c.get_count("train.val_every", t.val_every);
  const std::string order = c.get_string("train.gene_order", "random");
  if (order == "random") {
    t.gene_order = GeneOrder::random;
  } else if (order == "granger") {
    t.gene_order = GeneOrder::granger;
  } else {
    throw UsageError("train.gene_order must be random or granger");
  }
  t.lambda_rec = c.get_real("train.lambda_rec", t.lambda_rec);
  t.lambda_kl = c.get_real("train.lambda_kl", t.lambda_kl);
  t.clip_norm = c.get_real("train.clip_norm", t.clip_norm);
  t.validate();
  return t;
}

DiffusionSchedule schedule_from(const Config& c) {
  const std::size_t T = c.get_count("diffusion.T", 2000);
  if (T == 0 || T > 1000000) throw UsageError("diffusion.T must lie in [1, 1e6]");
  return DiffusionSchedule::linear(static_cast<int>(T), c.get_real("diffusion.beta_start", 1e-4),
                                   c.get_real("diffusion.beta_end", 2e-2));
}

SynthConfig synth_config_from(const Config& c, std::uint64_t seed) {
  SynthConfig s;
  s.seed = seed;
  s.n_genes = c.get_count("synth.n_genes", s.n_genes);
  s.n_spots = c.get_count("synth.n_spots", s.n_spots);
  s.n_cells = c.get_count("synth.n_cells", s.n_cells);
  s.noise_sd = c.get_real("synth.noise_sd", s.noise_sd);
  s.dropout_rate = c.get_real("synth.dropout_rate", s.dropout_rate);
  s.n_factors = c.get_count("synth.n_factors", s.n_factors);
  const std::size_t chains = c.get_count("synth.chains", 4);
  const std::size_t length = c.get_count("synth.chain_length", 3);
  if (chains > 0) {
    s.chain_edges = planted_chains(chains, length, c.get_real("synth.coefficient", 0.9), c.get_count("synth.lag", 1));
  }
  return s;
}

}  // namespace catgen
