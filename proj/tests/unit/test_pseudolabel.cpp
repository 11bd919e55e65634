#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "smokeseg/common.hpp"
#include "smokeseg/manifest.hpp"
#include "smokeseg/mask_io.hpp"
#include "smokeseg/pseudolabel.hpp"
#include "test_util.hpp"

using namespace smokeseg;
using test::TempDir;

namespace {

TeacherRequest request_for(int w, int h, std::vector<BoxAnnotation> boxes) {
  TeacherRequest r;
  r.width = w;
  r.height = h;
  r.boxes = std::move(boxes);
  return r;
}

SegMask fill_box_union(int w, int h, const std::vector<BoxAnnotation>& boxes) {
  SegMask m = SegMask::zeros(w, h);
  for (const auto& b : boxes) {
    for (int y = b.y_min; y < b.y_max; ++y) {
      for (int x = b.x_min; x < b.x_max; ++x) m.at(x, y) = 1;
    }
  }
  return m;
}

// Throws on a marked sample; otherwise fills boxes. For job failure tests.
class FlakyTeacher final : public TeacherAdapter {
 public:
  explicit FlakyTeacher(std::string fail_marker) : fail_marker_(std::move(fail_marker)) {}
  TeacherKind kind() const override { return TeacherKind::SyntheticOracle; }
  std::string descriptor() const override { return "flaky"; }
  bool needs_pixels() const override { return false; }
  TeacherResult segment(const TeacherRequest& request) override {
    if (request.image_path.find(fail_marker_) != std::string::npos) {
      throw Error("teacher exploded");
    }
    TeacherResult result;
    for (const auto& b : request.boxes) {
      result.masks.push_back(fill_box_union(request.width, request.height, {b}));
      result.scores.push_back(1.0);
    }
    return result;
  }

 private:
  std::string fail_marker_;
};

DatasetManifest three_sample_manifest() {
  DatasetManifest manifest;
  for (int i = 0; i < 3; ++i) {
    ImageSample s;
    s.id = "s" + std::to_string(i + 1);
    s.image_path = "images/" + s.id + ".png";
    s.width = 16;
    s.height = 12;
    if (i != 1) s.boxes = {{2, 2, 8, 8}};
    s.source = Source::FixedCamera;
    s.group_key = "g";
    s.split = i < 2 ? Split::Train : Split::Val;
    manifest.samples.push_back(std::move(s));
  }
  return manifest;
}

}  // namespace

TEST_CASE("generate_pseudo_label: zero boxes give the all-zero mask") {
  auto teacher = oracle_box_teacher(OracleShape::FillBox, 1);
  const SegMask m = generate_pseudo_label(request_for(8, 8, {}), *teacher);
  CHECK(m.positive_count() == 0);
}

TEST_CASE("generate_pseudo_label: fill-box oracle returns exactly the rectangle") {
  auto teacher = oracle_box_teacher(OracleShape::FillBox, 1);
  const BoxAnnotation box{2, 3, 6, 6};  // area 12
  const SegMask m = generate_pseudo_label(request_for(10, 10, {box}), *teacher);
  CHECK(m.positive_count() == 12);
  CHECK(m == fill_box_union(10, 10, {box}));
}

TEST_CASE("generate_pseudo_label: overlapping boxes union by per-pixel OR") {
  auto teacher = oracle_box_teacher(OracleShape::FillBox, 1);
  // two 12 px boxes overlapping in 4 px -> 20 positives
  const BoxAnnotation b1{0, 0, 4, 3};
  const BoxAnnotation b2{2, 1, 6, 4};
  REQUIRE(b1.area() == 12);
  REQUIRE(b2.area() == 12);
  const SegMask m = generate_pseudo_label(request_for(8, 8, {b1, b2}), *teacher);
  CHECK(m.positive_count() == 20);
  CHECK(m == fill_box_union(8, 8, {b1, b2}));
}

TEST_CASE("oracle teacher: inscribed ellipse pixel count tracks pi*rx*ry") {
  auto teacher = oracle_box_teacher(OracleShape::InscribedEllipse, 1);
  for (auto [w, h] : std::vector<std::pair<int, int>>{{8, 6}, {10, 10}, {12, 7}, {16, 10}, {11, 7}}) {
    const BoxAnnotation box{0, 0, w, h};
    const SegMask m = generate_pseudo_label(request_for(32, 32, {box}), *teacher);
    const double expected = std::ceil(M_PI * (w / 2.0) * (h / 2.0));
    CHECK(std::abs(m.positive_count() - expected) <= 2);
    CHECK(std::abs(m.positive_count() - expected) / expected <= 0.06);
    // inscribed: never outside the box
    SegMask box_mask = fill_box_union(32, 32, {box});
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      if (m.data[i]) CHECK(box_mask.data[i] == 1);
    }
  }
}

TEST_CASE("oracle teacher: same seed gives bit-identical masks and scores") {
  const auto boxes = std::vector<BoxAnnotation>{{1, 1, 7, 5}, {4, 2, 9, 9}};
  auto t1 = oracle_box_teacher(OracleShape::InscribedEllipse, 42);
  auto t2 = oracle_box_teacher(OracleShape::InscribedEllipse, 42);
  const TeacherResult r1 = t1->segment(request_for(12, 12, boxes));
  const TeacherResult r2 = t2->segment(request_for(12, 12, boxes));
  CHECK(r1.masks == r2.masks);
  CHECK(r1.scores == r2.scores);
  for (double s : r1.scores) {
    CHECK(s >= 0.5);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("generate_pseudo_label: box permutation invariance") {
  auto teacher = oracle_box_teacher(OracleShape::FillBox, 7);
  const std::vector<BoxAnnotation> boxes = {{0, 0, 3, 3}, {2, 2, 6, 6}, {5, 1, 8, 4}};
  std::vector<BoxAnnotation> reversed(boxes.rbegin(), boxes.rend());
  const SegMask a = generate_pseudo_label(request_for(8, 8, boxes), *teacher);
  const SegMask b = generate_pseudo_label(request_for(8, 8, reversed), *teacher);
  CHECK(a == b);
}

TEST_CASE("generate_pseudo_label: union rule is OR-homomorphic over boxes") {
  auto teacher = oracle_box_teacher(OracleShape::FillBox, 3);
  // exhaustive over all box pairs on a 4x4 canvas
  std::vector<BoxAnnotation> all;
  for (int x0 = 0; x0 < 4; ++x0) {
    for (int x1 = x0 + 1; x1 <= 4; ++x1) {
      for (int y0 = 0; y0 < 4; ++y0) {
        for (int y1 = y0 + 1; y1 <= 4; ++y1) all.push_back({x0, y0, x1, y1});
      }
    }
  }
  for (const auto& b1 : all) {
    for (const auto& b2 : all) {
      const SegMask joint = generate_pseudo_label(request_for(4, 4, {b1, b2}), *teacher);
      const SegMask m1 = generate_pseudo_label(request_for(4, 4, {b1}), *teacher);
      const SegMask m2 = generate_pseudo_label(request_for(4, 4, {b2}), *teacher);
      SegMask orred = m1;
      for (std::size_t i = 0; i < orred.data.size(); ++i) {
        orred.data[i] = orred.data[i] || m2.data[i];
      }
      REQUIRE(joint == orred);
    }
  }
}

TEST_CASE("generate_pseudo_label: positives stay inside the prompt-box union (fill oracle)") {
  std::mt19937_64 rng(15);
  auto teacher = oracle_box_teacher(OracleShape::FillBox, 15);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<BoxAnnotation> boxes;
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
      const int x0 = static_cast<int>(rng() % 7);
      const int y0 = static_cast<int>(rng() % 7);
      boxes.push_back({x0, y0, x0 + 1 + static_cast<int>(rng() % (8 - x0)),
                       y0 + 1 + static_cast<int>(rng() % (8 - y0))});
    }
    const SegMask m = generate_pseudo_label(request_for(8, 8, boxes), *teacher);
    const SegMask allowed = fill_box_union(8, 8, boxes);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      if (m.data[i]) REQUIRE(allowed.data[i] == 1);
    }
  }
}

TEST_CASE("generate_pseudo_label: teacher mask dimension mismatch is an error") {
  class WrongDims final : public TeacherAdapter {
   public:
    TeacherKind kind() const override { return TeacherKind::BoxPrompted; }
    std::string descriptor() const override { return "wrong-dims"; }
    bool needs_pixels() const override { return false; }
    TeacherResult segment(const TeacherRequest&) override {
      return {{SegMask::zeros(3, 3)}, {1.0}};
    }
  } teacher;
  CHECK_THROWS_WITH_AS(generate_pseudo_label(request_for(8, 8, {{0, 0, 2, 2}}), teacher),
                       doctest::Contains("3x3"), Error);
}

TEST_CASE("generate_pseudo_label: instance teachers respect the score threshold") {
  class TwoInstances final : public TeacherAdapter {
   public:
    TeacherKind kind() const override { return TeacherKind::BoxTrainedInstance; }
    std::string descriptor() const override { return "two-instances"; }
    bool needs_pixels() const override { return false; }
    TeacherResult segment(const TeacherRequest& request) override {
      SegMask low = SegMask::zeros(request.width, request.height);
      low.at(0, 0) = 1;
      SegMask high = SegMask::zeros(request.width, request.height);
      high.at(3, 3) = 1;
      return {{low, high}, {0.2, 0.9}};
    }
  } teacher;
  const SegMask m = generate_pseudo_label(request_for(6, 6, {{0, 0, 6, 6}}), teacher, 0.5);
  CHECK(m.positive_count() == 1);
  CHECK(m.at(3, 3) == 1);
  CHECK(m.at(0, 0) == 0);
}

TEST_CASE("generate_pseudo_label: clip_to_boxes intersects with the prompt box") {
  class Sprawling final : public TeacherAdapter {
   public:
    TeacherKind kind() const override { return TeacherKind::BoxPrompted; }
    std::string descriptor() const override { return "sprawling"; }
    bool needs_pixels() const override { return false; }
    TeacherResult segment(const TeacherRequest& request) override {
      SegMask everything = SegMask::zeros(request.width, request.height);
      for (auto& v : everything.data) v = 1;
      return {{everything}, {1.0}};
    }
  } teacher;
  const BoxAnnotation box{1, 1, 3, 3};
  const SegMask unclipped = generate_pseudo_label(request_for(6, 6, {box}), teacher, 0.5, false);
  CHECK(unclipped.positive_count() == 36);
  const SegMask clipped = generate_pseudo_label(request_for(6, 6, {box}), teacher, 0.5, true);
  CHECK(clipped.positive_count() == 4);
}

TEST_CASE("run_pseudolabel_job: writes one mask per TRAIN/VAL sample and an index") {
  TempDir dir("pljob");
  const DatasetManifest manifest = three_sample_manifest();
  auto teacher = oracle_box_teacher(OracleShape::FillBox, 5);
  const PseudoLabelSet set = run_pseudolabel_job(manifest, *teacher, dir.str());

  CHECK(set.mask_paths.size() == 3);
  for (const auto& s : manifest.samples) {
    const SegMask m = read_mask(set.mask_full_path(s.id), std::make_pair(s.width, s.height));
    CHECK(m.positive_count() == (s.boxes.empty() ? 0 : 36));
  }
  const PseudoLabelSet loaded =
      load_pseudolabel_index((dir.path() / "index.jsonl").string());
  CHECK(loaded.mask_paths == set.mask_paths);
  CHECK(loaded.teacher_descriptor == set.teacher_descriptor);
}

TEST_CASE("run_pseudolabel_job: rerun regenerates only the missing mask") {
  TempDir dir("pljob");
  const DatasetManifest manifest = three_sample_manifest();
  auto teacher = oracle_box_teacher(OracleShape::FillBox, 5);
  const PseudoLabelSet set = run_pseudolabel_job(manifest, *teacher, dir.str());

  const std::string victim = set.mask_full_path("s1");
  const auto mtime_s3 = std::filesystem::last_write_time(set.mask_full_path("s3"));
  std::filesystem::remove(victim);

  const PseudoLabelSet again = run_pseudolabel_job(manifest, *teacher, dir.str());
  CHECK(std::filesystem::exists(victim));
  CHECK(again.mask_paths.size() == 3);
  // untouched mask kept its mtime (not rewritten)
  CHECK(std::filesystem::last_write_time(set.mask_full_path("s3")) == mtime_s3);
}

TEST_CASE("run_pseudolabel_job: failing sample is isolated and reported") {
  TempDir dir("pljob");
  const DatasetManifest manifest = three_sample_manifest();  // s2 has no boxes
  DatasetManifest with_boxes = manifest;
  with_boxes.samples[1].boxes = {{1, 1, 4, 4}};  // make s2 call the teacher
  FlakyTeacher teacher("s2");
  CHECK_THROWS_WITH_AS(run_pseudolabel_job(with_boxes, teacher, dir.str()),
                       doctest::Contains("1 of 3"), Error);
  CHECK(std::filesystem::exists(dir.path() / "masks" / "s1.png"));
  CHECK(std::filesystem::exists(dir.path() / "masks" / "s3.png"));
  CHECK_FALSE(std::filesystem::exists(dir.path() / "index.jsonl"));
}

TEST_CASE("run_pseudolabel_job: parallel workers produce the same masks") {
  TempDir dir_a("pljob");
  TempDir dir_b("pljob");
  DatasetManifest manifest;
  for (int i = 0; i < 12; ++i) {
    ImageSample s;
    s.id = "p" + std::to_string(i);
    s.image_path = s.id + ".png";
    s.width = 10;
    s.height = 10;
    s.boxes = {{i % 5, 0, i % 5 + 4, 6}};
    s.source = Source::FixedCamera;
    s.group_key = "g";
    s.split = Split::Train;
    manifest.samples.push_back(std::move(s));
  }
  auto teacher = oracle_box_teacher(OracleShape::InscribedEllipse, 9);
  PseudoLabelOptions serial;
  serial.workers = 1;
  PseudoLabelOptions parallel;
  parallel.workers = 4;
  const PseudoLabelSet a = run_pseudolabel_job(manifest, *teacher, dir_a.str(), serial);
  const PseudoLabelSet b = run_pseudolabel_job(manifest, *teacher, dir_b.str(), parallel);
  for (const auto& s : manifest.samples) {
    CHECK(read_mask(a.mask_full_path(s.id)) == read_mask(b.mask_full_path(s.id)));
  }
}
