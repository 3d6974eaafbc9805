#include "catgen/checkpoint.hpp"
#include "catgen/error.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace catgen;

namespace {

Checkpoint sample_checkpoint() {
  CatConfig arch;
  arch.st_dim = 3;
  arch.sc_dim = 4;
  arch.d = 8;
  arch.heads = 2;
  arch.blocks = 2;
  arch.enc_hidden = 5;
  Checkpoint c{CatModel(arch, 9), DiffusionSchedule::linear(7).betas(), SamplingStrategy::parse("frac:2"), false,
               {"a", "b", "c"}, PrepConfig{}};
  c.model.set_latent_scale(0.37);
  c.prep.hvg_fraction = 0.5;
  c.prep.min_genes_sc = 3;
  c.prep.normalize = false;
  return c;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("tensor files round trip exactly") {
    TempDir dir("tensors");
    std::vector<ad::Parameter> t{{"x", Eigen::MatrixXd::Random(3, 2), true}, {"empty", Eigen::MatrixXd(0, 4), true}};
    write_tensors(t, dir / "t.bin");
    const auto back = read_tensors(dir / "t.bin");
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "x");
    CHECK(back[0].value == t[0].value);
    CHECK(back[1].value.cols() == 4);
    CHECK_FALSE(std::filesystem::exists(dir / "t.bin.tmp"));
  }

  TEST_CASE("checkpoints restore model, schedule and metadata") {
    TempDir dir("ckpt");
    const auto c = sample_checkpoint();
    save_checkpoint(c, dir / "m.ckpt");
    const auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(back.model.config().blocks == 2);
    CHECK(back.model.config().enc_hidden == 5);
    CHECK(back.model.latent_scale() == 0.37);
    for (std::size_t i = 0; i < c.model.parameters().size(); ++i) {
      CHECK(back.model.parameters()[i].value == c.model.parameters()[i].value);
    }
    CHECK(back.betas == c.betas);
    CHECK(back.sampling.to_string() == "frac:2");
    CHECK_FALSE(back.variational);
    CHECK(back.spot_ids == c.spot_ids);
    CHECK(back.prep.hvg_fraction == 0.5);
    CHECK(back.prep.min_genes_sc == 3);
    CHECK_FALSE(back.prep.normalize);
  }

  TEST_CASE("wrong magic, version and truncation are data errors") {
    TempDir dir("ckpt_bad");
    save_checkpoint(sample_checkpoint(), dir / "m.ckpt");
    std::string bytes = read_text(dir / "m.ckpt");

    std::string bad_version = bytes;
    bad_version[4] = 2;
    write_text(dir / "v.ckpt", bad_version);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "v.ckpt"), doctest::Contains("version"), DataError);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    write_text(dir / "g.ckpt", bad_magic);
    CHECK_THROWS_AS(load_checkpoint(dir / "g.ckpt"), DataError);

    write_text(dir / "t.ckpt", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), DataError);

    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);
  }

  TEST_CASE("a tensor file without metadata is not a checkpoint") {
    TempDir dir("ckpt_meta");
    write_tensors({{"x", Eigen::MatrixXd::Ones(1, 1), true}}, dir / "x.bin");
    CHECK_THROWS_AS(load_checkpoint(dir / "x.bin"), DataError);
  }

  TEST_CASE("spot labels with newlines are rejected") {
    TempDir dir("ckpt_label");
    auto c = sample_checkpoint();
    c.spot_ids[1] = "b\nc";
    CHECK_THROWS_AS(save_checkpoint(c, dir / "m.ckpt"), DataError);
  }
}
