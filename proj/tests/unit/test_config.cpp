#include <doctest.h>

#include <fstream>

#include "smokeseg/common.hpp"
#include "smokeseg/config.hpp"
#include "test_util.hpp"

using namespace smokeseg;
using test::TempDir;

TEST_CASE("config: paper defaults populate when the file is minimal") {
  const RunConfig c = parse_run_config(nlohmann::json::object());
  CHECK(c.train.loss.lambda0 == 0.4);
  CHECK(c.train.loss.lambda1 == 20.0);
  CHECK(c.train.loss.lambda2 == 1.0);
  CHECK(c.train.loss.lambda3 == 1.0);
  CHECK(c.train.loss.boundary_threshold == 0.8);
  CHECK(c.train.epochs == 50);
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.learning_rate == 1e-3);
  CHECK(c.train.weight_decay == 1e-2);
  CHECK(c.train.resolution_h == 192);
  CHECK(c.train.resolution_w == 320);
  CHECK(c.split.ratios == std::array<double, 3>{0.806, 0.174, 0.020});
  CHECK(c.split.min_gap_s == 120.0);
  CHECK(c.bench.warmup == 10);
  CHECK(c.bench.iters == 100);
}

TEST_CASE("config: unknown keys are rejected with their path") {
  CHECK_THROWS_WITH_AS(parse_run_config({{"sead", 1}}), doctest::Contains("unknown key 'sead'"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_run_config({{"train", {{"epochz", 3}}}}),
                       doctest::Contains("train.epochz"), Error);
  CHECK_THROWS_WITH_AS(parse_run_config({{"loss", {{"lambda4", 1.0}}}}),
                       doctest::Contains("loss.lambda4"), Error);
}

TEST_CASE("config: master seed propagates to train and student") {
  const RunConfig c = parse_run_config({{"seed", 99}});
  CHECK(c.seed == 99);
  CHECK(c.train.seed == 99);
  CHECK(c.student.seed == 99);

  // explicit subsystem seed wins
  const RunConfig d = parse_run_config({{"seed", 99}, {"train", {{"seed", 7}}}});
  CHECK(d.train.seed == 7);
  CHECK(d.student.seed == 99);
}

TEST_CASE("config: file round trip preserves overridden values") {
  TempDir dir("config");
  {
    std::ofstream out(dir.file("cfg.json"));
    out << R"({"seed": 5, "train": {"epochs": 3, "resolution": [96, 96]},
               "loss": {"lambda1": 10.0, "enable_l2": false},
               "teacher": {"kind": "oracle_ellipse", "score_threshold": 0.7}})";
  }
  const RunConfig c = load_run_config(dir.file("cfg.json"));
  CHECK(c.train.epochs == 3);
  CHECK(c.train.resolution_h == 96);
  CHECK(c.train.loss.lambda1 == 10.0);
  CHECK_FALSE(c.train.loss.enable_l2);
  CHECK(c.teacher.kind == "oracle_ellipse");
  CHECK(c.teacher.score_threshold == 0.7);
  // untouched defaults intact
  CHECK(c.train.loss.lambda0 == 0.4);

  const RunConfig reparsed = parse_run_config(run_config_to_json(c));
  CHECK(reparsed.train.epochs == c.train.epochs);
  CHECK(reparsed.train.loss.lambda1 == c.train.loss.lambda1);
  CHECK(reparsed.teacher.kind == c.teacher.kind);
}

TEST_CASE("config: malformed json and missing file are errors") {
  TempDir dir("config");
  {
    std::ofstream out(dir.file("bad.json"));
    out << "{ nope";
  }
  CHECK_THROWS_WITH_AS(load_run_config(dir.file("bad.json")), doctest::Contains("parse error"),
                       Error);
  CHECK_THROWS_WITH_AS(load_run_config(dir.file("missing.json")),
                       doctest::Contains("not found"), Error);
}
