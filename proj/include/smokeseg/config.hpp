#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "smokeseg/student.hpp"
#include "smokeseg/train.hpp"

namespace smokeseg {

// One config file drives every subcommand. Unknown keys are rejected so a
// typo cannot silently fall back to a default; missing keys take defaults.
struct RunConfig {
  std::uint64_t seed = 0;

  struct Paths {
    std::string manifest = "data/manifest.jsonl";
    std::string masks_dir = "out/pseudolabels";
    std::string checkpoints_dir = "out/checkpoints";
    std::string reports_dir = "out/reports";
    std::string gt_masks_dir;  // human ground truth for eval; may be empty
  } paths;

  struct Teacher {
    std::string kind = "oracle_fill_box";  // oracle_fill_box | oracle_ellipse |
                                           // external_box_prompted | external_instance
    std::string command;                   // external teachers: shell command
    double score_threshold = 0.5;
    bool clip_to_boxes = false;
    int workers = 1;
  } teacher;

  TrainConfig train;
  StudentConfig student;

  struct Eval {
    double threshold = 0.5;
    bool overlays = false;
  } eval;

  struct Bench {
    int warmup = 10;
    int iters = 100;
    int input_h = 192;
    int input_w = 320;
  } bench;

  struct SplitCfg {
    std::array<double, 3> ratios = {0.806, 0.174, 0.020};
    double min_gap_s = 120.0;
    std::string pin_test_ids;  // optional file, one sample id per line
  } split;
};

RunConfig default_run_config();
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& config);

}  // namespace smokeseg
