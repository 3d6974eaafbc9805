#include "catgen/error.hpp"
#include "catgen/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace catgen;
using ad::Matrix;

namespace {

CatConfig small_config() {
  CatConfig cfg;
  cfg.st_dim = 5;
  cfg.sc_dim = 7;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.blocks = 1;
  cfg.enc_hidden = 6;
  return cfg;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("config validation") {
    CatConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.heads = 3;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = small_config();
    cfg.st_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = small_config();
    cfg.d = 3;
    cfg.heads = 1;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = small_config();
    cfg.blocks = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
  }

  TEST_CASE("same seed gives identical parameters") {
    const CatModel a(small_config(), 3), b(small_config(), 3), c(small_config(), 4);
    REQUIRE(a.parameters().size() == b.parameters().size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
      CHECK(a.parameters()[i].value == b.parameters()[i].value);
      any_diff |= a.parameters()[i].value != c.parameters()[i].value;
    }
    CHECK(any_diff);
    CHECK_THROWS_AS(a.param("nope"), UsageError);
    CHECK(a.has_param("blocks.0.attn.q"));
    CHECK_FALSE(a.has_param("blocks.1.attn.q"));
    CHECK(a.latent_scale() == 1.0);
  }

  TEST_CASE("sinusoidal embedding") {
    const Matrix e = sinusoidal_embedding({0, 3}, 4);
    CHECK(e(0, 0) == 0.0);
    CHECK(e(0, 2) == 1.0);
    CHECK(e(1, 0) == doctest::Approx(std::sin(3.0)));
    CHECK(e(1, 1) == doctest::Approx(std::sin(3.0 / 100.0)));
    CHECK(e(1, 3) == doctest::Approx(std::cos(3.0 / 100.0)));
  }

  TEST_CASE("attention restricted to the diagonal is the identity map") {
    Rng rng(1);
    ad::Tape tape(false);
    const Matrix x = random_matrix(4, 6, rng);
    ad::BoolMatrix blocked = ad::BoolMatrix::Constant(4, 4, true);
    for (int i = 0; i < 4; ++i) blocked(i, i) = false;
    const auto I = tape.constant(Matrix::Identity(6, 6));
    const auto out = multi_head_attention(tape.constant(x), I, I, I, I, tape.constant(Matrix::Zero(1, 6)), 3, blocked);
    CHECK((out.value() - x).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("open attention is permutation equivariant") {
    Rng rng(2);
    ad::Tape tape(false);
    const Matrix x = random_matrix(5, 4, rng);
    std::vector<ad::Var> w;
    for (int i = 0; i < 4; ++i) w.push_back(tape.constant(random_matrix(4, 4, rng)));
    const auto bias = tape.constant(random_matrix(1, 4, rng));
    const ad::BoolMatrix open = ad::BoolMatrix::Constant(5, 5, false);
    const std::vector<Eigen::Index> perm{3, 0, 4, 1, 2};
    Matrix xp(5, 4);
    for (int i = 0; i < 5; ++i) xp.row(i) = x.row(perm[i]);
    const Matrix a = multi_head_attention(tape.constant(x), w[0], w[1], w[2], w[3], bias, 2, open).value();
    const Matrix b = multi_head_attention(tape.constant(xp), w[0], w[1], w[2], w[3], bias, 2, open).value();
    for (int i = 0; i < 5; ++i) CHECK((b.row(i) - a.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("encoders check widths and need a random source when variational") {
    const CatModel model(small_config(), 1);
    ad::Tape tape(false);
    BoundModel m(tape, model);
    Rng rng(1);
    const auto st = tape.constant(Matrix::Ones(3, 5));
    const auto e = encode(m, st, EncoderHead::st, false, nullptr);
    CHECK(e.z.rows() == 3);
    CHECK(e.z.cols() == 8);
    CHECK(e.z.value() == e.mean.value());
    CHECK_THROWS_AS(encode(m, st, EncoderHead::sc, false, nullptr), DataError);
    CHECK_THROWS_AS(encode(m, st, EncoderHead::st, true, nullptr), UsageError);
    const auto v = encode(m, st, EncoderHead::st, true, &rng);
    CHECK(v.z.value() != v.mean.value());
    CHECK(kl_divergence(v).value()(0, 0) >= 0.0);
    CHECK_THROWS_AS(kl_divergence(e), UsageError);
    CHECK(decode(m, e.z).cols() == 5);
    CHECK_THROWS_AS(decode(m, st), DataError);
  }

  TEST_CASE("forward output shape, value path and layout checks") {
    const CatModel model(small_config(), 2);
    Rng rng(3);
    const auto plan = ARStepPlan::from_sizes({2, 1});
    const auto mask = build_mask(3, 3, plan);
    auto batch = TokenBatch::aligned(random_matrix(3, 8, rng), random_matrix(2, 8, rng), random_matrix(3, 8, rng),
                                     {5, 5, 9}, {0.9, 0.9, 0.5}, plan);
    const Matrix out = cat_forward(model, batch, mask);
    CHECK(out.rows() == 3);
    CHECK(out.cols() == 8);

    ad::Tape tape;
    BoundModel m(tape, model);
    TokenInputs in{tape.constant(batch.condition), tape.constant(batch.clean), tape.constant(batch.noisy),
                   batch.noisy_timesteps, batch.noisy_alpha_bars, batch.clean_pair, batch.noisy_pair};
    CHECK(cat_forward(m, in, mask).value() == out);

    auto bad = batch;
    bad.noisy_alpha_bars[0] = 1.0;
    CHECK_THROWS_AS(cat_forward(model, bad, mask), UsageError);
    bad = batch;
    bad.clean_timesteps[0] = 4;
    CHECK_THROWS_AS(cat_forward(model, bad, mask), UsageError);
    bad = batch;
    bad.noisy_timesteps.pop_back();
    CHECK_THROWS_AS(cat_forward(model, bad, mask), UsageError);
    CHECK_THROWS_AS(cat_forward(model, batch, build_mask(3, 2, plan)), UsageError);
  }

  TEST_CASE("non-finite inputs raise a numeric error") {
    const CatModel model(small_config(), 2);
    const auto plan = ARStepPlan::from_sizes({2});
    Matrix noisy = Matrix::Zero(2, 8);
    noisy(0, 0) = std::numeric_limits<double>::infinity();
    const auto batch = TokenBatch::aligned(Matrix::Zero(2, 8), Matrix::Zero(0, 8), noisy, {1, 1}, {0.5, 0.5}, plan);
    CHECK_THROWS_AS(cat_forward(model, batch, build_mask(2, 2, plan)), NumericError);
  }

  TEST_CASE("from_tensors round trip and missing tensors") {
    const CatModel model(small_config(), 5);
    const CatModel back = CatModel::from_tensors(small_config(), model.parameters());
    CHECK(back.param("head.w").value == model.param("head.w").value);
    auto partial = model.parameters();
    partial.pop_back();
    CHECK_THROWS_AS(CatModel::from_tensors(small_config(), partial), DataError);
    auto wrong = model.parameters();
    wrong[0].value = Matrix::Zero(1, 1);
    CHECK_THROWS_AS(CatModel::from_tensors(small_config(), wrong), DataError);
  }
}
