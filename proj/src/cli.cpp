#include "catgen/cli.hpp"

#include "catgen/arplan.hpp"
#include "catgen/checkpoint.hpp"
#include "catgen/error.hpp"
#include "catgen/generate.hpp"
#include "catgen/granger.hpp"
#include "catgen/mask.hpp"
#include "catgen/metrics.hpp"
#include "catgen/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace catgen {

namespace {

struct Globals {
  std::uint64_t seed = 42;
  std::size_t threads = 0;
  int verbose = 0;
  std::string config_path;
  std::vector<std::string> overrides;  // key=value

  Config config() const {
    Config c = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
  }
};

std::string fmt_real(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

TableFormat format_of(const std::string& path) {
  return path.size() > 4 && path.substr(path.size() - 4) == ".tsv" ? TableFormat::tsv : TableFormat::csv;
}

std::vector<std::string> read_gene_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open gene list '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  if (out.empty()) throw DataError("gene list '" + path + "' is empty");
  return out;
}

void write_split_csv(const PreparedData& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "gene,split\n";
  const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
      {"train", &data.split.train_genes}, {"val", &data.split.val_genes}, {"test", &data.split.test_genes}};
  for (const auto& [name, idx] : parts) {
    for (std::size_t g : *idx) out << data.st.gene_ids[g] << ',' << name << '\n';
  }
}

void write_synth_config(const SynthConfig& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "# preprocessing suited to the synthetic matrices next to this file\n"
      << "[data]\nmin_genes_sc = 1\nmin_genes_st = 1\nhvg_fraction = 1\n\n"
      << "[synth]\nn_genes = " << s.n_genes << "\nn_spots = " << s.n_spots << "\nn_cells = " << s.n_cells
      << "\nnoise_sd = " << fmt_real(s.noise_sd) << "\ndropout_rate = " << fmt_real(s.dropout_rate)
      << "\nn_factors = " << s.n_factors << '\n';
}

struct RunOutcome {
  double val_pcc = 0.0;
  double test_pcc = 0.0;
};

RunOutcome train_and_score(const PreparedData& data, const Config& c, const TrainConfig& tc,
                           std::size_t blocks_override = 0) {
  Config local = c;
  if (blocks_override > 0) local.set("model.blocks", std::to_string(blocks_override));
  const CatConfig arch = cat_config_from(local, data.st.n_obs(), data.sc.n_obs());
  const DiffusionSchedule schedule = schedule_from(local);
  const FitResult fr = fit(make_fit_data(data), arch, schedule, tc);
  RunOutcome out;
  out.val_pcc = fr.best_val_pcc;
  const auto& test = data.split.test_genes;
  out.test_pcc = validation_pcc(fr.model, data.st.select_genes(test).values, data.sc.select_genes(test).values,
                                schedule, tc.sampling, tc.seed, tc.batch_genes);
  return out;
}

PreparedData load_prepared(const std::string& st_path, const std::string& sc_path, const PrepConfig& prep,
                           std::uint64_t seed) {
  const ExpressionMatrix st = load_matrix(st_path, format_of(st_path), Modality::ST);
  const ExpressionMatrix sc = load_matrix(sc_path, format_of(sc_path), Modality::SC);
  return prepare_dataset(st, sc, prep, seed);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::vector<std::string> copy = args;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(copy.size()), argv.data());
}

int run(int argc, char** argv) {
  CLI::App app{"catgen: causality-aware diffusion for spatial gene expression"};
  app.require_subcommand(1);
  Globals g;
  if (const char* env = std::getenv("CATGEN_SEED")) {
    std::uint64_t v = 0;
    const std::string s = env;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size()) g.seed = v;
  }
  app.add_option("--seed", g.seed, "Random seed (default 42, or CATGEN_SEED)");
  app.add_option("--threads", g.threads, "Worker threads for parallel sections (0 = all cores)");
  app.add_flag("-v,--verbose", g.verbose, "Increase log detail (repeatable)");
  app.add_option("--config", g.config_path, "key = value settings file with [sections]");
  app.add_option("--set", g.overrides, "Override one setting, e.g. --set train.epochs=50");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic paired ST/SC dataset with planted gene chains");
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();

  // granger
  auto* gr = app.add_subcommand("granger", "Rank gene pairs by lagged Granger F-statistic");
  std::string gr_in, gr_out;
  std::size_t gr_lag = 1, gr_top = 20;
  gr->add_option("--in", gr_in, "Expression matrix (genes x observations)")->required();
  gr->add_option("--out", gr_out, "Output CSV")->required();
  gr->add_option("--lag", gr_lag, "Lag order")->capture_default_str();
  gr->add_option("--top-k", gr_top, "Number of pairs to report")->capture_default_str();

  // mask
  auto* mk = app.add_subcommand("mask", "Write the attention mask for an AR step plan");
  std::size_t mk_s = 0, mk_c = 0;
  std::string mk_sz, mk_out, mk_pbm;
  double mk_alpha = 0.8;
  mk->add_option("--s", mk_s, "Number of gene tokens")->required();
  mk->add_option("--c", mk_c, "Number of condition tokens")->required();
  mk->add_option("--sz", mk_sz, "Comma-separated AR step sizes (default: draw a plan)");
  mk->add_option("--alpha", mk_alpha, "AR step decay when drawing a plan")->capture_default_str();
  mk->add_option("--out", mk_out, "Output CSV")->required();
  mk->add_option("--pbm", mk_pbm, "Optional PBM image of the mask");

  // train
  auto* tr = app.add_subcommand("train", "Train a model on paired ST/SC matrices");
  std::string tr_st, tr_sc, tr_out, tr_hist, tr_split;
  tr->add_option("--st", tr_st, "ST matrix (genes x spots)")->required();
  tr->add_option("--sc", tr_sc, "SC matrix (genes x cells)")->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--history", tr_hist, "History CSV (default: history.csv next to the checkpoint)");
  tr->add_option("--split", tr_split, "Gene split CSV (default: split.csv next to the checkpoint)");

  // generate
  auto* ge = app.add_subcommand("generate", "Generate ST profiles for genes from their SC profiles");
  std::string ge_ckpt, ge_sc, ge_genes, ge_out, ge_sampling;
  std::size_t ge_groups = 0, ge_batch = 0;
  ge->add_option("--ckpt", ge_ckpt, "Checkpoint")->required();
  ge->add_option("--sc", ge_sc, "SC matrix (raw, as given to train)")->required();
  ge->add_option("--genes", ge_genes, "File with one gene id per line")->required();
  ge->add_option("--out", ge_out, "Output CSV")->required();
  ge->add_option("--sampling", ge_sampling, "Inference timesteps: full, frac:<n> or adaptive");
  ge->add_option("--ar-groups", ge_groups, "Equal-width AR groups per chunk (default 1)");
  ge->add_option("--batch-genes", ge_batch, "Genes denoised jointly (default 32)");

  // eval
  auto* ev = app.add_subcommand("eval", "Per-gene PCC, SSIM, RMSE and JS against ground truth");
  std::string ev_pred, ev_truth, ev_out;
  bool ev_raw = false;
  ev->add_option("--pred", ev_pred, "Predicted matrix")->required();
  ev->add_option("--truth", ev_truth, "Ground-truth ST matrix (raw; preprocessed per config)")->required();
  ev->add_option("--out", ev_out, "Output CSV")->required();
  ev->add_flag("--truth-preprocessed", ev_raw, "Truth is already normalized; skip preprocessing");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Sweep one setting and report validation and test PCC");
  std::string ab_axis, ab_st, ab_sc, ab_out;
  std::size_t ab_seeds = 1;
  ab->add_option("--axis", ab_axis, "decay, blocks, sampling, decoder or encoder")
      ->required()
      ->check(CLI::IsMember({"decay", "blocks", "sampling", "decoder", "encoder"}));
  ab->add_option("--st", ab_st, "ST matrix (default: synthetic data)");
  ab->add_option("--sc", ab_sc, "SC matrix (default: synthetic data)");
  ab->add_option("--seeds", ab_seeds, "Training seeds per setting")->capture_default_str();
  ab->add_option("--out", ab_out, "Report CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  spdlog::drop("catgen");  // run() may be called repeatedly in one process
  auto logger = spdlog::stderr_color_st("catgen");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(g.verbose >= 2 ? spdlog::level::debug : g.verbose == 1 ? spdlog::level::info : spdlog::level::warn);

  try {
    const Config cfg = g.config();
    if (synth->parsed()) {
      const SynthConfig sc = synth_config_from(cfg, g.seed);
      const SynthData data = generate_synth(sc);
      std::filesystem::create_directories(synth_out);
      write_synth(data, synth_out);
      write_synth_config(sc, std::filesystem::path(synth_out) / "config.ini");
    } else if (gr->parsed()) {
      const ExpressionMatrix m = load_matrix(gr_in, format_of(gr_in), Modality::ST);
      const ScreenResult res = granger_screen(m, gr_lag, gr_top, g.threads);
      write_granger_csv(res.top, gr_out);
    } else if (mk->parsed()) {
      ARStepPlan plan;
      if (!mk_sz.empty()) {
        plan = ARStepPlan::parse(mk_sz);
      } else {
        Rng rng(g.seed);
        plan = generate_ar_steps(mk_s, mk_alpha, rng);
      }
      const AttentionMask mask = build_mask(mk_s, mk_c, plan);
      write_mask_csv(mask, mk_out);
      if (!mk_pbm.empty()) write_mask_pbm(mask, mk_pbm);
    } else if (tr->parsed()) {
      const PrepConfig prep = prep_config_from(cfg);
      const PreparedData data = load_prepared(tr_st, tr_sc, prep, g.seed);
      TrainConfig tc = train_config_from(cfg, g.seed);
      tc.threads = g.threads;
      const CatConfig arch = cat_config_from(cfg, data.st.n_obs(), data.sc.n_obs());
      const DiffusionSchedule schedule = schedule_from(cfg);
      FitResult fr = fit(make_fit_data(data), arch, schedule, tc);
      Checkpoint ckpt{std::move(fr.model), schedule.betas(), tc.sampling, tc.variational_encoder,
                      data.st.obs_ids, prep};
      save_checkpoint(ckpt, tr_out);
      const auto dir = std::filesystem::path(tr_out).parent_path();
      write_history_csv(fr.history, tr_hist.empty() ? dir / "history.csv" : std::filesystem::path(tr_hist));
      write_split_csv(data, tr_split.empty() ? dir / "split.csv" : std::filesystem::path(tr_split));
    } else if (ge->parsed()) {
      const Checkpoint ckpt = load_checkpoint(ge_ckpt);
      const ExpressionMatrix sc = preprocess(load_matrix(ge_sc, format_of(ge_sc), Modality::SC), ckpt.prep);
      GenerateOptions opts;
      opts.sampling = ge_sampling.empty() ? ckpt.sampling : SamplingStrategy::parse(ge_sampling, ckpt.sampling.decay);
      opts.ar_groups = ge_groups > 0 ? ge_groups : cfg.get_count("generate.ar_groups", 1);
      opts.batch_genes = ge_batch > 0 ? ge_batch : cfg.get_count("generate.batch_genes", 32);
      opts.seed = g.seed;
      const ExpressionMatrix pred =
          generate_genes(sc, read_gene_list(ge_genes), ckpt.model, ckpt.schedule(), opts, ckpt.spot_ids);
      save_matrix(pred, ge_out, TableFormat::csv);
    } else if (ev->parsed()) {
      const ExpressionMatrix pred = load_matrix(ev_pred, format_of(ev_pred), Modality::ST);
      ExpressionMatrix truth = load_matrix(ev_truth, format_of(ev_truth), Modality::ST);
      if (!ev_raw) truth = preprocess(truth, prep_config_from(cfg));
      write_metrics_csv(evaluate(pred, truth), ev_out);
    } else if (ab->parsed()) {
      if (ab_seeds == 0) throw UsageError("--seeds must be positive");
      PreparedData data;
      if (ab_st.empty() != ab_sc.empty()) throw UsageError("--st and --sc go together");
      if (ab_st.empty()) {
        const SynthData s = generate_synth(synth_config_from(cfg, g.seed));
        data = prepare_dataset(s.st, s.sc, prep_config_from(cfg, synth_prep_config()), g.seed);
      } else {
        data = load_prepared(ab_st, ab_sc, prep_config_from(cfg), g.seed);
      }
      std::vector<std::string> settings;
      if (ab_axis == "decay") settings = {"0.7", "0.8", "0.9", "1"};
      if (ab_axis == "blocks") settings = {"1", "2", "3", "4", "5"};
      if (ab_axis == "sampling") settings = {"full", "frac:2", "frac:3", "frac:4", "frac:20"};
      if (ab_axis == "decoder" || ab_axis == "encoder") settings = {"off", "on"};

      std::ofstream out(ab_out, std::ios::binary);
      if (!out) throw DataError("cannot write '" + ab_out + "'");
      out << "axis,setting,seed,val_pcc,test_pcc\n";
      for (const auto& setting : settings) {
        double val_sum = 0.0, test_sum = 0.0;
        for (std::size_t k = 0; k < ab_seeds; ++k) {
          Config local = cfg;
          std::size_t blocks = 0;
          if (ab_axis == "decay") local.set("ar.decay", setting);
          if (ab_axis == "sampling") local.set("diffusion.sampling", setting);
          if (ab_axis == "decoder") local.set("train.train_decoder", setting);
          if (ab_axis == "encoder") local.set("model.variational", setting);
          if (ab_axis == "blocks") blocks = std::stoul(setting);
          TrainConfig tc = train_config_from(local, g.seed + k);
          tc.threads = g.threads;
          const RunOutcome r = train_and_score(data, local, tc, blocks);
          out << ab_axis << ',' << setting << ',' << tc.seed << ',' << fmt_real(r.val_pcc) << ','
              << fmt_real(r.test_pcc) << '\n';
          val_sum += r.val_pcc;
          test_sum += r.test_pcc;
        }
        const double n = static_cast<double>(ab_seeds);
        out << ab_axis << ',' << setting << ",mean," << fmt_real(val_sum / n) << ',' << fmt_real(test_sum / n)
            << '\n';
      }
    }
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const NumericError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}

}  // namespace catgen
