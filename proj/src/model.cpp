#include "catgen/model.hpp"

#include "catgen/error.hpp"

#include <cmath>

namespace catgen {

void CatConfig::validate() const {
  if (st_dim == 0 || sc_dim == 0) throw UsageError("model input dimensions must be positive");
  if (d == 0 || heads == 0 || d % heads != 0) throw UsageError("latent width must be a positive multiple of heads");
  if (d % 2 != 0) throw UsageError("latent width must be even for the sinusoidal time embedding");
  if (blocks == 0 || ffn_mult == 0 || enc_hidden == 0) throw UsageError("model sizes must be positive");
}

namespace {

ad::Matrix xavier(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  ad::Matrix w(in, out);
  for (Eigen::Index j = 0; j < out; ++j) {
    for (Eigen::Index i = 0; i < in; ++i) w(i, j) = (2.0 * rng.uniform() - 1.0) * a;
  }
  return w;
}

}  // namespace

CatModel::CatModel(CatConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  build(&rng);
}

void CatModel::add(std::string name, ad::Matrix value, bool trainable) {
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), std::move(value), trainable});
}

void CatModel::build(Rng* init) {
  const auto p = static_cast<Eigen::Index>(cfg_.st_dim);
  const auto q = static_cast<Eigen::Index>(cfg_.sc_dim);
  const auto d = static_cast<Eigen::Index>(cfg_.d);
  const auto h = static_cast<Eigen::Index>(cfg_.enc_hidden);
  const auto f = static_cast<Eigen::Index>(cfg_.d * cfg_.ffn_mult);
  Rng dummy(0);
  Rng& rng = init != nullptr ? *init : dummy;
  auto zeros = [](Eigen::Index r, Eigen::Index c) { return ad::Matrix::Zero(r, c); };
  auto ones = [](Eigen::Index r, Eigen::Index c) { return ad::Matrix::Ones(r, c); };

  params_.reserve(32 + 13 * cfg_.blocks);
  for (const auto& [head, in] : {std::pair{"e1", p}, std::pair{"e2", q}}) {
    const std::string pre = head;
    add(pre + ".fc.w", xavier(in, h, rng));
    add(pre + ".fc.b", zeros(1, h));
    add(pre + ".mean.w", xavier(h, d, rng));
    add(pre + ".mean.b", zeros(1, d));
    add(pre + ".logvar.w", xavier(h, d, rng) * 0.01);
    add(pre + ".logvar.b", ad::Matrix::Constant(1, d, -6.0));
  }
  add("dec.fc.w", xavier(d, h, rng));
  add("dec.fc.b", zeros(1, h));
  add("dec.out.w", xavier(h, p, rng));
  add("dec.out.b", zeros(1, p));

  ad::Matrix types(3, d);
  for (Eigen::Index i = 0; i < types.size(); ++i) types.data()[i] = 0.02 * rng.normal();
  add("type_embed", types);
  add("time.w", xavier(d, d, rng));
  add("time.b", zeros(1, d));
  add("pair.w", xavier(d, d, rng));
  add("pair.b", zeros(1, d));

  for (std::size_t b = 0; b < cfg_.blocks; ++b) {
    const std::string pre = "blocks." + std::to_string(b) + ".";
    add(pre + "ln1.g", ones(1, d));
    add(pre + "ln1.b", zeros(1, d));
    add(pre + "attn.q", xavier(d, d, rng));
    add(pre + "attn.k", xavier(d, d, rng));
    add(pre + "attn.v", xavier(d, d, rng));
    add(pre + "attn.o", xavier(d, d, rng));
    add(pre + "attn.ob", zeros(1, d));
    add(pre + "ln2.g", ones(1, d));
    add(pre + "ln2.b", zeros(1, d));
    add(pre + "ffn.w1", xavier(d, f, rng));
    add(pre + "ffn.b1", zeros(1, f));
    add(pre + "ffn.w2", xavier(f, d, rng));
    add(pre + "ffn.b2", zeros(1, d));
  }
  add("head.ln.g", ones(1, d));
  add("head.ln.b", zeros(1, d));
  add("head.w", xavier(d, d, rng));
  add("head.b", zeros(1, d));
  add("head.cond.w", zeros(d, d));
  add("latent_scale", ones(1, 1), false);
  add("latent_bound", ad::Matrix::Constant(1, 1, 5.0), false);
}

ad::Parameter& CatModel::param(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown model parameter '" + name + "'");
  return params_[it->second];
}

const ad::Parameter& CatModel::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown model parameter '" + name + "'");
  return params_[it->second];
}

CatModel CatModel::from_tensors(CatConfig cfg, const std::vector<ad::Parameter>& tensors) {
  cfg.validate();
  CatModel model;
  model.cfg_ = cfg;
  model.build(nullptr);
  std::size_t matched = 0;
  for (const auto& t : tensors) {
    if (!model.has_param(t.name)) continue;
    auto& p = model.param(t.name);
    if (p.value.rows() != t.value.rows() || p.value.cols() != t.value.cols()) {
      throw DataError("tensor '" + t.name + "' has the wrong shape for this architecture");
    }
    p.value = t.value;
    ++matched;
  }
  if (matched != model.params_.size()) throw DataError("checkpoint is missing model tensors");
  return model;
}

ad::Var BoundModel::operator[](const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  ad::Var v = tape_.parameter(model_.param(name));
  bound_.emplace(name, v);
  return v;
}

Encoded encode(BoundModel& m, ad::Var x, EncoderHead head, bool variational, Rng* rng) {
  const std::string pre = head == EncoderHead::st ? "e1" : "e2";
  const auto expected = static_cast<Eigen::Index>(head == EncoderHead::st ? m.model().config().st_dim
                                                                         : m.model().config().sc_dim);
  if (x.cols() != expected) {
    throw DataError(pre + " expects inputs of length " + std::to_string(expected) + ", got " +
                    std::to_string(x.cols()));
  }
  ad::Var hidden = ad::gelu(ad::add_row(ad::matmul(x, m[pre + ".fc.w"]), m[pre + ".fc.b"]));
  Encoded out;
  out.mean = ad::add_row(ad::matmul(hidden, m[pre + ".mean.w"]), m[pre + ".mean.b"]);
  out.z = out.mean;
  if (variational) {
    if (rng == nullptr) throw UsageError("variational encoding needs a random source");
    out.logvar = ad::clamp(ad::add_row(ad::matmul(hidden, m[pre + ".logvar.w"]), m[pre + ".logvar.b"]), -20.0, 10.0);
    ad::Matrix eps(out.mean.rows(), out.mean.cols());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng->normal();
    ad::Var std_dev = ad::exp(ad::scale(out.logvar, 0.5));
    out.z = ad::add(out.mean, ad::mul(std_dev, m.tape().constant(std::move(eps))));
  }
  return out;
}

ad::Var kl_divergence(const Encoded& e) {
  if (!e.logvar.valid()) throw UsageError("KL divergence needs a variational encoding");
  // 0.5 * (mean^2 + exp(logvar) - 1 - logvar), averaged over entries.
  ad::Tape& t = e.mean.tape();
  ad::Var terms = ad::sub(ad::add(ad::square(e.mean), ad::exp(e.logvar)), e.logvar);
  ad::Var ones = t.constant(ad::Matrix::Ones(e.mean.rows(), e.mean.cols()));
  return ad::scale(ad::mean(ad::sub(terms, ones)), 0.5);
}

ad::Var decode(BoundModel& m, ad::Var latent) {
  if (latent.cols() != static_cast<Eigen::Index>(m.model().config().d)) {
    throw DataError("decoder expects latents of width " + std::to_string(m.model().config().d));
  }
  ad::Var hidden = ad::gelu(ad::add_row(ad::matmul(latent, m["dec.fc.w"]), m["dec.fc.b"]));
  return ad::add_row(ad::matmul(hidden, m["dec.out.w"]), m["dec.out.b"]);
}

ad::Matrix sinusoidal_embedding(const std::vector<int>& timesteps, std::size_t d) {
  const auto half = static_cast<Eigen::Index>(d / 2);
  ad::Matrix out(static_cast<Eigen::Index>(timesteps.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < timesteps.size(); ++r) {
    const double t = timesteps[r];
    for (Eigen::Index i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
      out(static_cast<Eigen::Index>(r), i) = std::sin(t * freq);
      out(static_cast<Eigen::Index>(r), half + i) = std::cos(t * freq);
    }
  }
  return out;
}

ad::Var multi_head_attention(ad::Var x, ad::Var wq, ad::Var wk, ad::Var wv, ad::Var wo, ad::Var bo,
                             std::size_t heads, const ad::BoolMatrix& blocked) {
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  ad::Var q = ad::matmul(x, wq);
  ad::Var k = ad::matmul(x, wk);
  ad::Var v = ad::matmul(x, wv);
  std::vector<ad::Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    ad::Var logits = ad::scale(ad::matmul_nt(ad::slice_cols(q, off, dh), ad::slice_cols(k, off, dh)), inv_sqrt);
    ad::Var probs = ad::masked_softmax(logits, blocked);
    outs.push_back(ad::matmul(probs, ad::slice_cols(v, off, dh)));
  }
  ad::Var joined = heads == 1 ? outs[0] : ad::concat_cols(outs);
  return ad::add_row(ad::matmul(joined, wo), bo);
}

ad::BoolMatrix to_bool_matrix(const AttentionMask& mask) {
  ad::BoolMatrix out(static_cast<Eigen::Index>(mask.seq), static_cast<Eigen::Index>(mask.seq));
  for (std::size_t r = 0; r < mask.seq; ++r) {
    for (std::size_t q = 0; q < mask.seq; ++q) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = mask.is_blocked(r, q);
    }
  }
  return out;
}

namespace {

ad::Var type_rows(BoundModel& m, Eigen::Index kind, Eigen::Index count) {
  return ad::gather_rows(m["type_embed"], std::vector<Eigen::Index>(static_cast<std::size_t>(count), kind));
}

}  // namespace

ad::Var cat_forward(BoundModel& m, const TokenInputs& in, const AttentionMask& mask) {
  const CatConfig& cfg = m.model().config();
  const auto d = static_cast<Eigen::Index>(cfg.d);
  const Eigen::Index c = in.condition.rows();
  const Eigen::Index v = in.clean.rows();
  const Eigen::Index s = in.noisy.rows();
  if (static_cast<std::size_t>(c) != mask.c || static_cast<std::size_t>(v) != mask.v ||
      static_cast<std::size_t>(s) != mask.s) {
    throw UsageError("token batch layout does not match the attention mask");
  }
  if (in.condition.cols() != d || in.clean.cols() != d || in.noisy.cols() != d) {
    throw UsageError("token width does not match the model latent width");
  }
  if (in.noisy_timesteps.size() != static_cast<std::size_t>(s) || in.noisy_alpha_bars.size() != static_cast<std::size_t>(s)) {
    throw UsageError("one timestep and signal level per noisy token");
  }
  if (c > 0 && (in.clean_pair.size() != static_cast<std::size_t>(v) ||
                in.noisy_pair.size() != static_cast<std::size_t>(s))) {
    throw UsageError("every clean and noisy token needs a paired condition");
  }

  ad::Tape& tape = m.tape();
  std::vector<ad::Var> parts;
  if (c > 0) parts.push_back(ad::add(in.condition, type_rows(m, 0, c)));

  ad::Var clean = ad::add(in.clean, type_rows(m, 1, v));
  ad::Var time = ad::add_row(
      ad::matmul(tape.constant(sinusoidal_embedding(in.noisy_timesteps, cfg.d)), m["time.w"]), m["time.b"]);
  ad::Var noisy = ad::add(ad::add(in.noisy, type_rows(m, 2, s)), time);
  if (c > 0) {
    ad::Var paired = ad::add_row(ad::matmul(in.condition, m["pair.w"]), m["pair.b"]);
    if (v > 0) clean = ad::add(clean, ad::gather_rows(paired, in.clean_pair));
    noisy = ad::add(noisy, ad::gather_rows(paired, in.noisy_pair));
  }
  if (v > 0) parts.push_back(clean);
  parts.push_back(noisy);
  ad::Var x = parts.size() == 1 ? parts[0] : ad::concat_rows(parts);

  const ad::BoolMatrix blocked = to_bool_matrix(mask);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string pre = "blocks." + std::to_string(b) + ".";
    ad::Var h = ad::layer_norm(x, m[pre + "ln1.g"], m[pre + "ln1.b"]);
    x = ad::add(x, multi_head_attention(h, m[pre + "attn.q"], m[pre + "attn.k"], m[pre + "attn.v"],
                                        m[pre + "attn.o"], m[pre + "attn.ob"], cfg.heads, blocked));
    ad::Var h2 = ad::layer_norm(x, m[pre + "ln2.g"], m[pre + "ln2.b"]);
    ad::Var ff = ad::gelu(ad::add_row(ad::matmul(h2, m[pre + "ffn.w1"]), m[pre + "ffn.b1"]));
    x = ad::add(x, ad::add_row(ad::matmul(ff, m[pre + "ffn.w2"]), m[pre + "ffn.b2"]));
  }
  ad::Var tail = ad::slice_rows(x, c + v, s);
  ad::Var head = ad::add_row(ad::matmul(ad::layer_norm(tail, m["head.ln.g"], m["head.ln.b"]), m["head.w"]),
                             m["head.b"]);
  if (c > 0) head = ad::add(head, ad::matmul(ad::gather_rows(in.condition, in.noisy_pair), m["head.cond.w"]));
  ad::Matrix skip(s, d), gain(s, d);
  for (Eigen::Index i = 0; i < s; ++i) {
    const double ab = in.noisy_alpha_bars[static_cast<std::size_t>(i)];
    if (!(ab >= 0.0 && ab < 1.0)) throw UsageError("signal level must lie in [0, 1)");
    skip.row(i).setConstant(1.0 / std::sqrt(1.0 - ab));
    gain.row(i).setConstant(-std::sqrt(ab / (1.0 - ab)));
  }
  ad::Var out = ad::add(ad::mul(in.noisy, tape.constant(std::move(skip))), ad::mul(head, tape.constant(std::move(gain))));
  if (!out.value().allFinite()) {
    throw NumericError("non-finite activation in CAT forward pass (max |activation| " +
                       std::to_string(tape.max_abs_value()) + ")");
  }
  return out;
}

TokenBatch TokenBatch::aligned(ad::Matrix condition, ad::Matrix clean, ad::Matrix noisy, std::vector<int> timesteps,
                               std::vector<double> alpha_bars, ARStepPlan plan) {
  TokenBatch b;
  const Eigen::Index c = condition.rows();
  b.clean_timesteps.assign(static_cast<std::size_t>(clean.rows()), 0);
  if (c > 0) {
    for (Eigen::Index i = 0; i < clean.rows(); ++i) b.clean_pair.push_back(i % c);
    for (Eigen::Index i = 0; i < noisy.rows(); ++i) b.noisy_pair.push_back(i % c);
  }
  b.condition = std::move(condition);
  b.clean = std::move(clean);
  b.noisy = std::move(noisy);
  b.noisy_timesteps = std::move(timesteps);
  b.noisy_alpha_bars = std::move(alpha_bars);
  b.plan = std::move(plan);
  return b;
}

ad::Matrix cat_forward(const CatModel& model, const TokenBatch& batch, const AttentionMask& mask) {
  for (int t : batch.clean_timesteps) {
    if (t != 0) throw UsageError("clean tokens must carry timestep 0");
  }
  ad::Tape tape(false);
  BoundModel m(tape, model);
  TokenInputs in;
  in.condition = tape.constant(batch.condition);
  in.clean = tape.constant(batch.clean);
  in.noisy = tape.constant(batch.noisy);
  in.noisy_timesteps = batch.noisy_timesteps;
  in.noisy_alpha_bars = batch.noisy_alpha_bars;
  in.clean_pair = batch.clean_pair;
  in.noisy_pair = batch.noisy_pair;
  return cat_forward(m, in, mask).value();
}

}  // namespace catgen
