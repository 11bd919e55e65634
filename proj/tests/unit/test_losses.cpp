#include <doctest.h>

#include <cmath>
#include <random>

#include "smokeseg/common.hpp"
#include "smokeseg/losses.hpp"
#include "test_util.hpp"

using namespace smokeseg;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

Grid const_grid(int h, int w, double v) {
  Grid g = Grid::zeros(h, w);
  for (auto& x : g.v) x = v;
  return g;
}

StudentOutputs const_outputs(int h, int w, double v) {
  return {const_grid(h, w, v), const_grid(h, w, v), const_grid(h, w, v)};
}

}  // namespace

TEST_CASE("seg_bce: zero logits give ln 2 for any target") {
  std::mt19937_64 rng(1);
  const Grid logits = const_grid(4, 4, 0.0);
  for (int trial = 0; trial < 5; ++trial) {
    const SegMask target = test::random_mask(4, 4, rng);
    CHECK(seg_bce(logits, target) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("seg_bce: saturated correct logits give a vanishing loss") {
  SegMask target = SegMask::zeros(4, 4);
  for (int i = 0; i < 7; ++i) target.data[i] = 1;
  Grid logits = Grid::zeros(4, 4);
  for (std::size_t i = 0; i < logits.v.size(); ++i) logits.v[i] = target.data[i] ? 20.0 : -20.0;
  CHECK(seg_bce(logits, target) <= 1e-6);
}

TEST_CASE("seg_bce: two-pixel hand-computed value") {
  Grid logits = Grid::zeros(1, 2);
  logits.v = {logit(0.8), logit(0.4)};
  SegMask target = SegMask::zeros(2, 1);
  target.data = {1, 0};
  const double expected = -(std::log(0.8) + std::log(0.6)) / 2.0;  // 0.36700...
  CHECK(seg_bce(logits, target) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(seg_bce(logits, target) == doctest::Approx(0.3670).epsilon(1e-4));
}

TEST_CASE("seg_bce: dimension mismatch throws") {
  CHECK_THROWS_AS(seg_bce(Grid::zeros(2, 2), SegMask::zeros(3, 3)), Error);
}

TEST_CASE("weighted_boundary_ce: hand expansion on a 2x2 target with one edge pixel") {
  EdgeMap target = EdgeMap::zeros(2, 2);
  target.at(0, 0) = 1;
  const Grid logits = const_grid(2, 2, 0.0);  // sigmoid 0.5 everywhere
  const double expected = (1.5 / 4.0) * std::log(2.0);  // 0.259930...
  CHECK(weighted_boundary_ce(logits, target) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("weighted_boundary_ce: perfect confident prediction") {
  EdgeMap target = EdgeMap::zeros(4, 4);
  target.at(1, 1) = target.at(2, 1) = 1;
  Grid logits = Grid::zeros(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) logits.at(y, x) = target.at(x, y) ? 20.0 : -20.0;
  }
  CHECK(weighted_boundary_ce(logits, target) <= 1e-6);
}

TEST_CASE("weighted_boundary_ce: constant targets fall back to unweighted BCE") {
  const Grid logits = const_grid(3, 3, 0.0);
  CHECK(weighted_boundary_ce(logits, EdgeMap::zeros(3, 3)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  EdgeMap ones = EdgeMap::zeros(3, 3);
  for (auto& v : ones.data) v = 1;
  CHECK(weighted_boundary_ce(logits, ones) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bas_loss: empty gate yields exactly 0") {
  const Grid final_logits = const_grid(3, 3, 1.0);
  const Grid boundary = const_grid(3, 3, 0.0);  // sigmoid 0.5 < t
  CHECK(bas_loss(final_logits, SegMask::zeros(3, 3), boundary, 0.8) == 0.0);
}

TEST_CASE("bas_loss: full gate reduces to seg_bce on the final head") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> dist(0.0, 1.5);
  Grid final_logits = Grid::zeros(4, 4);
  for (auto& v : final_logits.v) v = dist(rng);
  const SegMask target = test::random_mask(4, 4, rng);
  const Grid boundary = const_grid(4, 4, 10.0);  // sigmoid ~1 > t everywhere
  CHECK(bas_loss(final_logits, target, boundary, 0.8) ==
        doctest::Approx(seg_bce(final_logits, target)).epsilon(1e-12));
}

TEST_CASE("bas_loss: t = 0 with strictly positive boundary sigmoid equals seg_bce") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0.0, 2.0);
  Grid final_logits = Grid::zeros(5, 5);
  Grid boundary = Grid::zeros(5, 5);
  for (auto& v : final_logits.v) v = dist(rng);
  for (auto& v : boundary.v) v = dist(rng);  // sigmoid always > 0
  const SegMask target = test::random_mask(5, 5, rng);
  CHECK(bas_loss(final_logits, target, boundary, 0.0) ==
        doctest::Approx(seg_bce(final_logits, target)).epsilon(1e-12));
}

TEST_CASE("bas_loss: exactly one gated pixel, target 1, sigmoid 0.5") {
  Grid final_logits = const_grid(3, 3, 0.0);
  Grid boundary = const_grid(3, 3, -5.0);
  boundary.at(1, 1) = 5.0;  // only this pixel gates
  SegMask target = SegMask::zeros(3, 3);
  target.at(1, 1) = 1;
  CHECK(bas_loss(final_logits, target, boundary, 0.8) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("total_loss: unit components with default lambdas give exactly 22.4") {
  LossBreakdown breakdown;
  breakdown.lambdas = {0.4, 20.0, 1.0, 1.0};
  breakdown.components = {1.0, 1.0, 1.0, 1.0};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) total += breakdown.contribution(i);
  CHECK(total == 22.4);  // exact in IEEE double with this summation order
}

TEST_CASE("total_loss: weighted sum and component bookkeeping") {
  // constant outputs/targets chosen so every component is analytic
  const int n = 4;
  StudentOutputs outputs = const_outputs(n, n, 0.0);
  SegMask target = SegMask::zeros(n, n);
  EdgeMap edges = EdgeMap::zeros(n, n);
  LossConfig cfg;  // defaults

  const LossBreakdown out = total_loss(outputs, target, edges, cfg);
  // l0 = l1 = ln 2 (all-zero target, sigmoid 0.5); l2 falls back to ln 2;
  // l3 = 0 (sigmoid 0.5 < t = 0.8 gates nothing)
  CHECK(out.components[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(out.components[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(out.components[2] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(out.components[3] == 0.0);
  CHECK(out.total ==
        doctest::Approx((0.4 + 20.0 + 1.0) * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("total_loss: arithmetic on given components") {
  LossBreakdown breakdown;
  breakdown.lambdas = {0.4, 20.0, 1.0, 1.0};
  breakdown.components = {0.5, 0.1, 0.2, 0.3};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) total += breakdown.contribution(i);
  CHECK(total == doctest::Approx(2.7).epsilon(1e-12));
}

TEST_CASE("total_loss: toggled-off terms contribute exactly 0") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> dist(0.0, 1.0);
  StudentOutputs outputs = const_outputs(4, 4, 0.0);
  for (auto* g : {&outputs.aux_seg_logits, &outputs.final_seg_logits, &outputs.boundary_logits}) {
    for (auto& v : g->v) v = dist(rng);
  }
  const SegMask target = test::random_mask(4, 4, rng);
  EdgeMap edges = EdgeMap::zeros(4, 4);
  edges.at(0, 0) = 1;

  LossConfig cfg;
  cfg.enable_l1 = false;
  StudentOutputs grads;
  const LossBreakdown out = total_loss_with_grad(outputs, target, edges, cfg, grads);
  CHECK(out.components[1] == 0.0);
  CHECK(out.contribution(1) == 0.0);
  CHECK(out.total == doctest::Approx(out.contribution(0) + out.contribution(2) +
                                     out.contribution(3))
                         .epsilon(1e-12));
  // l1 off and the gate empty: no gradient reaches the final head
  bool gate_empty = true;
  for (double v : outputs.boundary_logits.v) {
    if (1.0 / (1.0 + std::exp(-v)) > cfg.boundary_threshold) gate_empty = false;
  }
  if (gate_empty) {
    for (double v : grads.final_seg_logits.v) CHECK(v == 0.0);
  }
}

TEST_CASE("total_loss: scaling a lambda by powers of two scales its contribution exactly") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0.0, 1.0);
  StudentOutputs outputs = const_outputs(4, 4, 0.0);
  for (auto* g : {&outputs.aux_seg_logits, &outputs.final_seg_logits, &outputs.boundary_logits}) {
    for (auto& v : g->v) v = dist(rng);
  }
  const SegMask target = test::random_mask(4, 4, rng);
  EdgeMap edges = EdgeMap::zeros(4, 4);
  edges.at(1, 1) = edges.at(2, 2) = 1;

  const LossConfig base;
  const LossBreakdown ref = total_loss(outputs, target, edges, base);
  for (int i = 0; i < 4; ++i) {
    for (double c : {2.0, 0.5}) {
      LossConfig scaled = base;
      (i == 0 ? scaled.lambda0
       : i == 1 ? scaled.lambda1
       : i == 2 ? scaled.lambda2
                : scaled.lambda3) *= c;
      const LossBreakdown out = total_loss(outputs, target, edges, scaled);
      CHECK(out.components[i] == ref.components[i]);
      CHECK(out.contribution(i) == c * ref.contribution(i));
    }
  }
}

TEST_CASE("total_loss: nonnegative, zero iff every enabled component is zero") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> dist(0.0, 2.0);
  for (int trial = 0; trial < 40; ++trial) {
    StudentOutputs outputs = const_outputs(4, 4, 0.0);
    for (auto* g :
         {&outputs.aux_seg_logits, &outputs.final_seg_logits, &outputs.boundary_logits}) {
      for (auto& v : g->v) v = dist(rng);
    }
    const SegMask target = test::random_mask(4, 4, rng);
    EdgeMap edges = EdgeMap::zeros(4, 4);
    edges.at(0, 1) = 1;
    const LossBreakdown out = total_loss(outputs, target, edges, LossConfig{});
    CHECK(out.total >= 0.0);
    const bool all_zero = out.components[0] == 0.0 && out.components[1] == 0.0 &&
                          out.components[2] == 0.0 && out.components[3] == 0.0;
    CHECK((out.total == 0.0) == all_zero);
  }
}
