#include "smokeseg/config.hpp"

#include <fstream>
#include <set>

#include "smokeseg/common.hpp"

namespace smokeseg {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw Error("config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw Error("config: unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
    }
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) obj.at(key).get_to(out);
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  check_keys(j, {"seed", "paths", "teacher", "train", "student", "loss", "eval", "bench", "split"},
             "");
  get_if(j, "seed", c.seed);
  // The top-level seed is the master seed; subsystem seeds follow it unless
  // the file pins them explicitly.
  c.train.seed = c.seed;
  c.student.seed = c.seed;

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, {"manifest", "masks_dir", "checkpoints_dir", "reports_dir", "gt_masks_dir"},
               "paths");
    get_if(p, "manifest", c.paths.manifest);
    get_if(p, "masks_dir", c.paths.masks_dir);
    get_if(p, "checkpoints_dir", c.paths.checkpoints_dir);
    get_if(p, "reports_dir", c.paths.reports_dir);
    get_if(p, "gt_masks_dir", c.paths.gt_masks_dir);
  }
  if (j.contains("teacher")) {
    const auto& t = j.at("teacher");
    check_keys(t, {"kind", "command", "score_threshold", "clip_to_boxes", "workers"}, "teacher");
    get_if(t, "kind", c.teacher.kind);
    get_if(t, "command", c.teacher.command);
    get_if(t, "score_threshold", c.teacher.score_threshold);
    get_if(t, "clip_to_boxes", c.teacher.clip_to_boxes);
    get_if(t, "workers", c.teacher.workers);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t,
               {"epochs", "batch_size", "learning_rate", "weight_decay", "resolution",
                "seed", "workers", "edge_width_px"},
               "train");
    get_if(t, "epochs", c.train.epochs);
    get_if(t, "batch_size", c.train.batch_size);
    get_if(t, "learning_rate", c.train.learning_rate);
    get_if(t, "weight_decay", c.train.weight_decay);
    if (t.contains("resolution")) {
      const auto& r = t.at("resolution");
      if (!r.is_array() || r.size() != 2) {
        throw Error("config: train.resolution must be [height, width]");
      }
      c.train.resolution_h = r[0].get<int>();
      c.train.resolution_w = r[1].get<int>();
    }
    get_if(t, "seed", c.train.seed);
    get_if(t, "workers", c.train.workers);
    get_if(t, "edge_width_px", c.train.edge_width_px);
  }
  if (j.contains("student")) {
    const auto& s = j.at("student");
    check_keys(s, {"stem_channels", "body_channels", "body_convs", "head_channels", "seed"},
               "student");
    get_if(s, "stem_channels", c.student.stem_channels);
    get_if(s, "body_channels", c.student.body_channels);
    get_if(s, "body_convs", c.student.body_convs);
    get_if(s, "head_channels", c.student.head_channels);
    get_if(s, "seed", c.student.seed);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    check_keys(l,
               {"lambda0", "lambda1", "lambda2", "lambda3", "boundary_threshold", "enable_l0",
                "enable_l1", "enable_l2", "enable_l3"},
               "loss");
    get_if(l, "lambda0", c.train.loss.lambda0);
    get_if(l, "lambda1", c.train.loss.lambda1);
    get_if(l, "lambda2", c.train.loss.lambda2);
    get_if(l, "lambda3", c.train.loss.lambda3);
    get_if(l, "boundary_threshold", c.train.loss.boundary_threshold);
    get_if(l, "enable_l0", c.train.loss.enable_l0);
    get_if(l, "enable_l1", c.train.loss.enable_l1);
    get_if(l, "enable_l2", c.train.loss.enable_l2);
    get_if(l, "enable_l3", c.train.loss.enable_l3);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e, {"threshold", "overlays"}, "eval");
    get_if(e, "threshold", c.eval.threshold);
    get_if(e, "overlays", c.eval.overlays);
  }
  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    check_keys(b, {"warmup", "iters", "input"}, "bench");
    get_if(b, "warmup", c.bench.warmup);
    get_if(b, "iters", c.bench.iters);
    if (b.contains("input")) {
      const auto& r = b.at("input");
      if (!r.is_array() || r.size() != 2) throw Error("config: bench.input must be [height, width]");
      c.bench.input_h = r[0].get<int>();
      c.bench.input_w = r[1].get<int>();
    }
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, {"ratios", "min_gap_s", "pin_test_ids"}, "split");
    if (s.contains("ratios")) {
      const auto& r = s.at("ratios");
      if (!r.is_array() || r.size() != 3) {
        throw Error("config: split.ratios must be [train, val, test]");
      }
      for (int i = 0; i < 3; ++i) c.split.ratios[i] = r[i].get<double>();
    }
    get_if(s, "min_gap_s", c.split.min_gap_s);
    get_if(s, "pin_test_ids", c.split.pin_test_ids);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config parse error in " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  return json{
      {"seed", c.seed},
      {"paths",
       {{"manifest", c.paths.manifest},
        {"masks_dir", c.paths.masks_dir},
        {"checkpoints_dir", c.paths.checkpoints_dir},
        {"reports_dir", c.paths.reports_dir},
        {"gt_masks_dir", c.paths.gt_masks_dir}}},
      {"teacher",
       {{"kind", c.teacher.kind},
        {"command", c.teacher.command},
        {"score_threshold", c.teacher.score_threshold},
        {"clip_to_boxes", c.teacher.clip_to_boxes},
        {"workers", c.teacher.workers}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay},
        {"resolution", {c.train.resolution_h, c.train.resolution_w}},
        {"seed", c.train.seed},
        {"workers", c.train.workers},
        {"edge_width_px", c.train.edge_width_px}}},
      {"student", c.student},
      {"loss", c.train.loss},
      {"eval", {{"threshold", c.eval.threshold}, {"overlays", c.eval.overlays}}},
      {"bench",
       {{"warmup", c.bench.warmup},
        {"iters", c.bench.iters},
        {"input", {c.bench.input_h, c.bench.input_w}}}},
      {"split",
       {{"ratios", c.split.ratios},
        {"min_gap_s", c.split.min_gap_s},
        {"pin_test_ids", c.split.pin_test_ids}}}};
}

}  // namespace smokeseg
