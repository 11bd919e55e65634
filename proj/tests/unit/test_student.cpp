#include <doctest.h>

#include <cmath>
#include <random>

#include "smokeseg/common.hpp"
#include "gradcheck.hpp"
#include "smokeseg/student.hpp"
#include "test_util.hpp"

using namespace smokeseg;

TEST_CASE("reference student: three logit grids at input resolution") {
  ReferenceStudent model(StudentConfig{8, 12, 2, 8, 3});
  const Tensor input = Tensor::zeros(3, 64, 64);
  const StudentOutputs out = model.forward(input);
  for (const Grid* g : {&out.aux_seg_logits, &out.final_seg_logits, &out.boundary_logits}) {
    CHECK(g->height == 64);
    CHECK(g->width == 64);
  }
}

TEST_CASE("reference student: same seed, identical parameters; different seed differs") {
  const StudentConfig cfg{16, 32, 3, 16, 42};
  ReferenceStudent a(cfg), b(cfg);
  CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  StudentConfig other = cfg;
  other.seed = 43;
  ReferenceStudent c(other);
  CHECK_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST_CASE("reference student: outputs finite on random input") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist(0.0, 1.0);
  ReferenceStudent model(StudentConfig{16, 32, 3, 16, 5});
  Tensor input = Tensor::zeros(3, 32, 32);
  for (auto& v : input.v) v = dist(rng);
  const StudentOutputs out = model.forward(input);
  for (const Grid* g : {&out.aux_seg_logits, &out.final_seg_logits, &out.boundary_logits}) {
    for (double v : g->v) CHECK(std::isfinite(v));
  }
}

TEST_CASE("reference student: rejects inputs not divisible by the trunk stride") {
  ReferenceStudent model;
  CHECK_THROWS_WITH_AS(model.forward(Tensor::zeros(3, 30, 32)),
                       doctest::Contains("not divisible"), Error);
}

TEST_CASE("reference student: parameter count matches the layer arithmetic") {
  const StudentConfig cfg{16, 32, 3, 16, 0};
  ReferenceStudent model(cfg);
  auto conv = [](int in_c, int out_c) { return out_c * in_c * 9 + out_c; };
  const std::size_t expected = conv(3, 16) + conv(16, 32) + 2 * conv(32, 32) +
                               3 * (conv(32, 16) + conv(16, 1));
  CHECK(model.parameter_count() == expected);
  CHECK(model.descriptor().find(std::to_string(expected)) != std::string::npos);
}

TEST_CASE("checkpoint: save/load round trip restores parameters and outputs") {
  test::TempDir dir("ckpt");
  ReferenceStudent model(StudentConfig{8, 12, 2, 8, 11});
  const std::string path = save_checkpoint(dir.str(), model, {{"epoch", 3}});
  CHECK(path.find("epoch3") != std::string::npos);

  const Checkpoint ckpt = load_checkpoint(path);
  CHECK(ckpt.meta.at("epoch") == 3);
  CHECK(ckpt.params.size() == model.parameter_count());
  auto restored = student_from_checkpoint(ckpt);

  std::mt19937_64 rng(2);
  Tensor input = Tensor::zeros(3, 16, 16);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : input.v) v = dist(rng);
  const StudentOutputs a = model.forward(input);
  const StudentOutputs b = restored->forward(input);
  CHECK(a.final_seg_logits.v == b.final_seg_logits.v);
  CHECK(a.aux_seg_logits.v == b.aux_seg_logits.v);
  CHECK(a.boundary_logits.v == b.boundary_logits.v);
}

TEST_CASE("checkpoint: distinct parameters give distinct content hashes") {
  test::TempDir dir("ckpt");
  ReferenceStudent a(StudentConfig{4, 8, 1, 4, 1});
  ReferenceStudent b(StudentConfig{4, 8, 1, 4, 2});
  const std::string pa = save_checkpoint(dir.str(), a, {{"epoch", 1}});
  const std::string pb = save_checkpoint(dir.str(), b, {{"epoch", 1}});
  CHECK(pa != pb);
}

TEST_CASE("gradcheck: analytic gradients match finite differences (default loss)") {
  test::GradFixture fixture(101, 3.0);
  const LossConfig cfg;
  REQUIRE(fixture.gate_margin(cfg.boundary_threshold) > 5e-3);
  const auto result = test::gradcheck_total_loss(fixture.model, fixture.input, fixture.target,
                                                 fixture.edges, cfg);
  CHECK(result.checked == fixture.model.parameter_count());
  CHECK(result.max_rel_err < 1e-3);
}

TEST_CASE("gradcheck: empty BAS gate variant") {
  test::GradFixture fixture(103, -3.0);
  const LossConfig cfg;
  REQUIRE(fixture.gate_margin(cfg.boundary_threshold) > 5e-3);
  const auto result = test::gradcheck_total_loss(fixture.model, fixture.input, fixture.target,
                                                 fixture.edges, cfg);
  CHECK(result.max_rel_err < 1e-3);
}
