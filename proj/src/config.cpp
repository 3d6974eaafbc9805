#include "catgen/config.hpp"

#include "catgen/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace catgen {

namespace {

enum class Kind { count, real, flag, text };

const std::map<std::string, Kind>& registry() {
  static const std::map<std::string, Kind> keys = {
      {"data.format", Kind::text},          {"data.min_genes_sc", Kind::count},
      {"data.min_genes_st", Kind::count},   {"data.hvg_fraction", Kind::real},
      {"data.normalize", Kind::flag},       {"diffusion.T", Kind::count},
      {"diffusion.beta_start", Kind::real}, {"diffusion.beta_end", Kind::real},
      {"diffusion.sampling", Kind::text},   {"ar.decay", Kind::real},
      {"model.d", Kind::count},             {"model.heads", Kind::count},
      {"model.blocks", Kind::count},        {"model.ffn_mult", Kind::count},
      {"model.enc_hidden", Kind::count},    {"model.variational", Kind::flag},
      {"train.epochs", Kind::count},        {"train.batch_genes", Kind::count},
      {"train.passes_per_epoch", Kind::count}, {"train.ae_epochs", Kind::count},
      {"train.lr", Kind::real},             {"train.ae_lr", Kind::real},
      {"train.train_decoder", Kind::flag},  {"train.train_sc_encoder", Kind::flag},  {"train.val_every", Kind::count},
      {"train.gene_order", Kind::text},     {"train.lambda_rec", Kind::real},
      {"train.lambda_kl", Kind::real},      {"train.clip_norm", Kind::real},
      {"generate.ar_groups", Kind::count},  {"generate.batch_genes", Kind::count},
      {"synth.n_genes", Kind::count},       {"synth.n_spots", Kind::count},
      {"synth.n_cells", Kind::count},       {"synth.noise_sd", Kind::real},
      {"synth.dropout_rate", Kind::real},   {"synth.n_factors", Kind::count},
      {"synth.chains", Kind::count},        {"synth.chain_length", Kind::count},
      {"synth.coefficient", Kind::real},    {"synth.lag", Kind::count},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_flag(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "off" || v == "no") {
    out = false;
    return true;
  }
  return false;
}

template <typename T>
bool parse_number(const std::string& v, T& out) {
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  auto it = registry().find(key);
  if (it == registry().end()) throw UsageError("unknown config key '" + key + "'");
  bool ok = true;
  switch (it->second) {
    case Kind::count: {
      std::size_t n = 0;
      ok = parse_number(value, n);
      break;
    }
    case Kind::real: {
      double x = 0.0;
      ok = parse_number(value, x);
      break;
    }
    case Kind::flag: {
      bool b = false;
      ok = parse_flag(value, b);
      break;
    }
    case Kind::text: ok = !value.empty(); break;
  }
  if (!ok) throw UsageError("config key '" + key + "' has invalid value '" + value + "'");
  values_[key] = value;
}

Config Config::parse(const std::string& text, const std::string& source) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(where + ": " + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_real(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double x = 0.0;
  parse_number(it->second, x);
  return x;
}

std::size_t Config::get_count(const std::string& key, std::size_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t n = 0;
  parse_number(it->second, n);
  return n;
}

bool Config::get_flag(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  bool b = fallback;
  parse_flag(it->second, b);
  return b;
}

}  // namespace catgen
