#include "catgen/checkpoint.hpp"

#include "catgen/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace catgen {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'T', 'G'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("truncated checkpoint while reading " + what);
  return v;
}

ad::Matrix scalar(double v) { return ad::Matrix::Constant(1, 1, v); }

ad::Matrix encode_strings(const std::vector<std::string>& items) {
  std::string joined;
  for (const auto& s : items) {
    if (s.find('\n') != std::string::npos) throw DataError("label contains a newline: '" + s + "'");
    joined += s;
    joined += '\n';
  }
  ad::Matrix out(1, static_cast<Eigen::Index>(joined.size()));
  for (std::size_t i = 0; i < joined.size(); ++i) out(0, static_cast<Eigen::Index>(i)) = static_cast<unsigned char>(joined[i]);
  return out;
}

std::vector<std::string> decode_strings(const ad::Matrix& m) {
  std::vector<std::string> out;
  std::string cur;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const char ch = static_cast<char>(static_cast<unsigned char>(m.data()[i]));
    if (ch == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return out;
}

}  // namespace

void write_tensors(const std::vector<ad::Parameter>& tensors, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put<std::uint32_t>(out, 2);
      put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
      put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
      out.write(reinterpret_cast<const char*>(t.value.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.value.size())));
    }
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ad::Parameter> read_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("'" + path.string() + "' is not a checkpoint");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, "tensor count");
  std::vector<ad::Parameter> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, "name length");
    if (len > 4096) throw DataError("corrupt checkpoint: tensor name too long");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto ndim = get<std::uint32_t>(in, "rank of " + name);
    if (ndim < 1 || ndim > 2) throw DataError("tensor '" + name + "' has unsupported rank " + std::to_string(ndim));
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t k = 0; k < ndim; ++k) dims[ndim == 1 ? 1 : k] = get<std::uint64_t>(in, "shape of " + name);
    if (dims[0] * dims[1] > (1ull << 32)) throw DataError("corrupt checkpoint: tensor '" + name + "' too large");
    ad::Matrix value(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    in.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(sizeof(double) * value.size()));
    if (!in) throw DataError("truncated checkpoint in tensor '" + name + "'");
    out.push_back({std::move(name), std::move(value), true});
  }
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const CatConfig& cfg = ckpt.model.config();
  std::vector<ad::Parameter> tensors;
  auto meta = [&](const std::string& key, double v) { tensors.push_back({"meta." + key, scalar(v), false}); };
  meta("st_dim", static_cast<double>(cfg.st_dim));
  meta("sc_dim", static_cast<double>(cfg.sc_dim));
  meta("d", static_cast<double>(cfg.d));
  meta("heads", static_cast<double>(cfg.heads));
  meta("blocks", static_cast<double>(cfg.blocks));
  meta("ffn_mult", static_cast<double>(cfg.ffn_mult));
  meta("enc_hidden", static_cast<double>(cfg.enc_hidden));
  meta("variational", ckpt.variational ? 1.0 : 0.0);
  meta("sampling.kind", static_cast<double>(static_cast<int>(ckpt.sampling.kind)));
  meta("sampling.n", static_cast<double>(ckpt.sampling.n));
  meta("sampling.decay", ckpt.sampling.decay);
  meta("prep.min_genes_sc", static_cast<double>(ckpt.prep.min_genes_sc));
  meta("prep.min_genes_st", static_cast<double>(ckpt.prep.min_genes_st));
  meta("prep.hvg_fraction", ckpt.prep.hvg_fraction);
  meta("prep.normalize", ckpt.prep.normalize ? 1.0 : 0.0);
  ad::Matrix betas(1, static_cast<Eigen::Index>(ckpt.betas.size()));
  for (std::size_t i = 0; i < ckpt.betas.size(); ++i) betas(0, static_cast<Eigen::Index>(i)) = ckpt.betas[i];
  tensors.push_back({"schedule.betas", betas, false});
  tensors.push_back({"labels.spots", encode_strings(ckpt.spot_ids), false});
  for (const auto& p : ckpt.model.parameters()) tensors.push_back(p);
  write_tensors(tensors, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::map<std::string, ad::Matrix> byname;
  std::vector<ad::Parameter> params;
  for (auto& t : read_tensors(path)) {
    if (t.name.rfind("meta.", 0) == 0 || t.name.rfind("schedule.", 0) == 0 || t.name.rfind("labels.", 0) == 0) {
      byname[t.name] = std::move(t.value);
    } else {
      params.push_back(std::move(t));
    }
  }
  auto need = [&](const std::string& key) -> const ad::Matrix& {
    auto it = byname.find(key);
    if (it == byname.end()) throw DataError("checkpoint lacks '" + key + "'");
    return it->second;
  };
  auto count = [&](const std::string& key) {
    const double v = need("meta." + key)(0, 0);
    if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw DataError("checkpoint field meta." + key + " is not a count");
    }
    return static_cast<std::size_t>(v);
  };

  CatConfig cfg;
  cfg.st_dim = count("st_dim");
  cfg.sc_dim = count("sc_dim");
  cfg.d = count("d");
  cfg.heads = count("heads");
  cfg.blocks = count("blocks");
  cfg.ffn_mult = count("ffn_mult");
  cfg.enc_hidden = count("enc_hidden");
  try {
    cfg.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint architecture invalid: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.model = CatModel::from_tensors(cfg, params);
  ckpt.variational = need("meta.variational")(0, 0) != 0.0;
  const auto kind = count("sampling.kind");
  if (kind > 2) throw DataError("checkpoint has unknown sampling kind");
  ckpt.sampling.kind = static_cast<SamplingStrategy::Kind>(kind);
  ckpt.sampling.n = static_cast<int>(count("sampling.n"));
  ckpt.sampling.decay = need("meta.sampling.decay")(0, 0);
  ckpt.prep.min_genes_sc = count("prep.min_genes_sc");
  ckpt.prep.min_genes_st = count("prep.min_genes_st");
  ckpt.prep.hvg_fraction = need("meta.prep.hvg_fraction")(0, 0);
  ckpt.prep.normalize = need("meta.prep.normalize")(0, 0) != 0.0;
  const ad::Matrix& betas = need("schedule.betas");
  ckpt.betas.assign(betas.data(), betas.data() + betas.size());
  ckpt.spot_ids = decode_strings(need("labels.spots"));
  if (ckpt.spot_ids.size() != cfg.st_dim) throw DataError("checkpoint spot labels do not match its ST width");
  try {
    ckpt.schedule();
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint schedule invalid: ") + e.what());
  }
  return ckpt;
}

}  // namespace catgen
