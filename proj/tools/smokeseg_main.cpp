// Operator CLI: import / split / pseudolabel / train / eval / fp-eval /
// bench / ablate, all driven by one JSON config file.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "smokeseg/bench.hpp"
#include "smokeseg/common.hpp"
#include "smokeseg/config.hpp"
#include "smokeseg/edge_targets.hpp"
#include "smokeseg/manifest.hpp"
#include "smokeseg/mask_io.hpp"
#include "smokeseg/metrics.hpp"
#include "smokeseg/pseudolabel.hpp"
#include "smokeseg/splitter.hpp"
#include "smokeseg/student.hpp"
#include "smokeseg/train.hpp"

namespace {

using namespace smokeseg;
using nlohmann::json;

struct CliOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string checkpoint;
  std::string manifest_override;
  long long min_area = 0;
  bool overlays = false;
  bool random_weights = false;
  int epochs_override = -1;
};

RunConfig load_config(const CliOptions& opts) {
  RunConfig config =
      opts.config_path.empty() ? default_run_config() : load_run_config(opts.config_path);
  if (opts.seed_set) {
    config.seed = opts.seed;
    config.train.seed = opts.seed;
    config.student.seed = opts.seed;
  }
  if (!opts.manifest_override.empty()) config.paths.manifest = opts.manifest_override;
  if (opts.overlays) config.eval.overlays = true;
  if (opts.epochs_override > 0) config.train.epochs = opts.epochs_override;
  return config;
}

std::unique_ptr<TeacherAdapter> make_teacher(const RunConfig& config) {
  std::string command = config.teacher.command;
  if (const char* env = std::getenv("SMOKESEG_TEACHER_CMD")) command = env;
  const std::string& kind = config.teacher.kind;
  if (kind == "oracle_fill_box") return oracle_box_teacher(OracleShape::FillBox, config.seed);
  if (kind == "oracle_ellipse") {
    return oracle_box_teacher(OracleShape::InscribedEllipse, config.seed);
  }
  if (kind == "external_box_prompted") {
    return external_process_teacher(TeacherKind::BoxPrompted, command);
  }
  if (kind == "external_instance") {
    return external_process_teacher(TeacherKind::BoxTrainedInstance, command);
  }
  throw Error("config: unknown teacher.kind '" + kind + "'");
}

// Deterministic result payload; timestamps live only in the meta block.
void write_run_record(const RunConfig& config, const std::string& command, const json& outputs) {
  json record = {{"command", command},
                 {"config", run_config_to_json(config)},
                 {"outputs", outputs}};
  if (std::filesystem::exists(config.paths.manifest)) {
    record["input_hashes"] = {{"manifest", hex64(fnv1a64_file(config.paths.manifest))}};
  }
  const json doc = {{"meta", {{"timestamp", iso8601_now()}}}, {"record", record}};
  const std::string path =
      (std::filesystem::path(config.paths.reports_dir) / ("run_record_" + command + ".json"))
          .string();
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << "\n";
}

std::string resolve_checkpoint(const RunConfig& config, const CliOptions& opts) {
  if (!opts.checkpoint.empty()) return opts.checkpoint;
  const std::string best_path =
      (std::filesystem::path(config.paths.checkpoints_dir) / "best.json").string();
  std::ifstream in(best_path);
  if (!in) {
    throw Error("no --checkpoint given and " + best_path + " not found (run `train` first)");
  }
  json best;
  in >> best;
  return best.at("checkpoint").get<std::string>();
}

std::vector<EvalItem> collect_eval_items(const DatasetManifest& manifest, Split split,
                                         const std::string& gt_dir) {
  if (gt_dir.empty()) throw Error("paths.gt_masks_dir is required for evaluation");
  std::vector<EvalItem> items;
  for (const auto& s : manifest.samples) {
    if (s.split != split) continue;
    const std::string gt_path = (std::filesystem::path(gt_dir) / (s.id + ".png")).string();
    items.push_back({s, read_mask(gt_path, std::make_pair(s.width, s.height))});
  }
  if (items.empty()) throw Error("no samples with split " + std::string(to_string(split)));
  return items;
}

int cmd_import(const RunConfig& config, const CliOptions& opts) {
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  const auto counts = split_counts(manifest);
  std::map<std::string, int> by_source;
  std::size_t boxes = 0;
  for (const auto& s : manifest.samples) {
    ++by_source[to_string(s.source)];
    boxes += s.boxes.size();
  }
  std::cout << "manifest: " << config.paths.manifest << "\n"
            << "samples: " << manifest.samples.size() << "  boxes: " << boxes << "\n"
            << "split train/val/test: " << counts[0] << "/" << counts[1] << "/" << counts[2]
            << "\n";
  for (const auto& [source, n] : by_source) std::cout << "  " << source << ": " << n << "\n";
  if (!opts.out.empty()) {
    save_manifest(manifest, opts.out);
    std::cout << "normalized manifest written to " << opts.out << "\n";
  }
  write_run_record(config, "import",
                   {{"samples", manifest.samples.size()},
                    {"train", counts[0]},
                    {"val", counts[1]},
                    {"test", counts[2]}});
  return 0;
}

int cmd_split(const RunConfig& config, const CliOptions& opts) {
  DatasetManifest manifest = load_manifest(config.paths.manifest);

  // UAV streams are thinned first; other sources pass through.
  std::vector<ImageSample> uav;
  for (const auto& s : manifest.samples) {
    if (s.source == Source::Uav) uav.push_back(s);
  }
  std::set<std::string> kept_uav;
  if (!uav.empty()) {
    for (auto& id : temporal_thin(uav, config.split.min_gap_s)) kept_uav.insert(std::move(id));
  }
  DatasetManifest thinned;
  thinned.version = manifest.version;
  for (const auto& s : manifest.samples) {
    if (s.source != Source::Uav || kept_uav.count(s.id)) thinned.samples.push_back(s);
  }
  const std::size_t dropped = manifest.samples.size() - thinned.samples.size();

  std::set<std::string> pinned;
  if (!config.split.pin_test_ids.empty()) {
    std::ifstream in(config.split.pin_test_ids);
    if (!in) throw Error("pin_test_ids file not found: " + config.split.pin_test_ids);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) pinned.insert(line);
    }
  }

  const SplitAssignment assignment =
      group_split(thinned.samples, config.split.ratios, config.seed, pinned);
  const DatasetManifest split_manifest = apply_split(thinned, assignment);
  const SplitReport report = verify_split(split_manifest, config.split.min_gap_s);

  const std::string out_manifest =
      opts.out.empty()
          ? (std::filesystem::path(config.paths.reports_dir) / "manifest_split.jsonl").string()
          : opts.out;
  save_manifest(split_manifest, out_manifest);
  save_split(assignment,
             (std::filesystem::path(config.paths.reports_dir) / "split.tsv").string());
  {
    const std::string report_path =
        (std::filesystem::path(config.paths.reports_dir) / "split_report.json").string();
    ensure_parent_dir(report_path);
    std::ofstream out(report_path, std::ios::trunc);
    out << report.to_json().dump(2) << "\n";
  }

  std::cout << "thinned " << dropped << " UAV frame(s), split " << thinned.samples.size()
            << " samples\n"
            << report.table() << "split manifest written to " << out_manifest << "\n";
  write_run_record(config, "split",
                   {{"manifest_out", out_manifest},
                    {"dropped_by_thinning", dropped},
                    {"findings", report.findings.size()}});
  return report.ok() ? 0 : 1;
}

int cmd_pseudolabel(const RunConfig& config, const CliOptions&) {
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  auto teacher = make_teacher(config);
  PseudoLabelOptions options;
  options.score_threshold = config.teacher.score_threshold;
  options.clip_to_boxes = config.teacher.clip_to_boxes;
  options.workers = config.teacher.workers;
  const PseudoLabelSet set =
      run_pseudolabel_job(manifest, *teacher, config.paths.masks_dir, options);
  std::cout << "pseudo-labels: " << set.mask_paths.size() << " masks by " << set.teacher_descriptor
            << "\nindex: " << (std::filesystem::path(config.paths.masks_dir) / "index.jsonl").string()
            << "\n";
  write_run_record(config, "pseudolabel",
                   {{"masks", set.mask_paths.size()}, {"teacher", set.teacher_descriptor}});
  return 0;
}

int cmd_train(const RunConfig& config, const CliOptions&) {
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  const PseudoLabelSet labels = load_pseudolabel_index(
      (std::filesystem::path(config.paths.masks_dir) / "index.jsonl").string());
  auto model = reference_student(config.student);
  std::cout << "training " << model->descriptor() << " for " << config.train.epochs
            << " epochs\n";
  const TrainHistory history =
      train_student(*model, manifest, labels, config.train, config.paths.checkpoints_dir);
  const EpochRecord& best = select_best_checkpoint(history);

  const std::string best_path =
      (std::filesystem::path(config.paths.checkpoints_dir) / "best.json").string();
  {
    ensure_parent_dir(best_path);
    std::ofstream out(best_path, std::ios::trunc);
    out << json{{"epoch", best.epoch},
                {"checkpoint", best.checkpoint_ref},
                {"val_miou", best.val_miou}}
               .dump(2)
        << "\n";
  }
  for (const auto& r : history) {
    std::cout << "epoch " << r.epoch << "  train_loss " << r.train_loss << "  val_loss "
              << r.val_loss << "  val_miou " << r.val_miou << "\n";
  }
  std::cout << "best epoch " << best.epoch << " (val mIoU " << best.val_miou << ") -> "
            << best.checkpoint_ref << "\n";
  write_run_record(config, "train",
                   {{"epochs", history.size()},
                    {"best_epoch", best.epoch},
                    {"best_val_miou", best.val_miou},
                    {"best_checkpoint", best.checkpoint_ref}});
  return 0;
}

int cmd_eval(const RunConfig& config, const CliOptions& opts) {
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  const auto items = collect_eval_items(manifest, Split::Test, config.paths.gt_masks_dir);
  const Checkpoint ckpt = load_checkpoint(resolve_checkpoint(config, opts));
  auto model = student_from_checkpoint(ckpt);

  EvalOptions eval_options;
  eval_options.threshold = config.eval.threshold;
  eval_options.eval_height = config.train.resolution_h;
  eval_options.eval_width = config.train.resolution_w;
  if (config.eval.overlays) {
    eval_options.overlays_dir =
        (std::filesystem::path(config.paths.reports_dir) / "overlays").string();
    ensure_dir(eval_options.overlays_dir);
  }
  const MetricsReport report = evaluate_model(*model, items, eval_options);

  const std::string report_path =
      (std::filesystem::path(config.paths.reports_dir) / "eval_report.json").string();
  ensure_parent_dir(report_path);
  {
    std::ofstream out(report_path, std::ios::trunc);
    out << json{{"meta", {{"timestamp", iso8601_now()}, {"checkpoint", ckpt.content_hash}}},
                {"result", report_to_json(report)}}
               .dump(2)
        << "\n";
  }
  std::cout << report_table(report) << "report written to " << report_path << "\n";
  write_run_record(config, "eval", {{"report", report_path}, {"miou", report.miou}});
  return 0;
}

int cmd_fp_eval(const RunConfig& config, const CliOptions& opts) {
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  const Checkpoint ckpt = load_checkpoint(resolve_checkpoint(config, opts));
  auto model = student_from_checkpoint(ckpt);

  std::vector<SegMask> preds;
  for (const auto& s : manifest.samples) {
    if (!s.boxes.empty()) {
      throw Error("fp-eval expects smokeless samples; '" + s.id + "' has boxes");
    }
    const cv::Mat image = read_image_bgr(s.image_path);
    const Grid probs =
        predict_probabilities(*model, image, config.train.resolution_h, config.train.resolution_w,
                              s.height, s.width);
    preds.push_back(binarize(probs, config.eval.threshold));
  }
  const double rate = false_positive_rate(preds, opts.min_area);

  const std::string report_path =
      (std::filesystem::path(config.paths.reports_dir) / "fp_report.json").string();
  ensure_parent_dir(report_path);
  {
    std::ofstream out(report_path, std::ios::trunc);
    out << json{{"meta", {{"timestamp", iso8601_now()}, {"checkpoint", ckpt.content_hash}}},
                {"result",
                 {{"fp_rate", rate},
                  {"fp_rate_display", round3(rate)},
                  {"images", preds.size()},
                  {"min_area", opts.min_area}}}}
               .dump(2)
        << "\n";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "FP rate: %.3f (%zu images)\n", round3(rate), preds.size());
  std::cout << buf << "report written to " << report_path << "\n";
  write_run_record(config, "fp-eval", {{"fp_rate", rate}, {"images", preds.size()}});
  return 0;
}

int cmd_bench(const RunConfig& config, const CliOptions& opts) {
  std::unique_ptr<ReferenceStudent> model;
  if (opts.random_weights) {
    model = reference_student(config.student);
  } else {
    model = student_from_checkpoint(load_checkpoint(resolve_checkpoint(config, opts)));
  }
  StudentRunner runner(*model);
  const FpsReport report =
      measure_fps(runner, config.bench.input_h, config.bench.input_w, config.bench.warmup,
                  config.bench.iters);

  const auto dir = std::filesystem::path(config.paths.reports_dir);
  const std::string report_path = (dir / "bench_report.json").string();
  ensure_parent_dir(report_path);
  {
    std::ofstream out(report_path, std::ios::trunc);
    out << json{{"meta", {{"timestamp", iso8601_now()}}}, {"result", report.to_json()}}.dump(2)
        << "\n";
  }
  write_latency_histogram_png(report, (dir / "bench_latency_hist.png").string());
  std::cout << report.table() << "report written to " << report_path << "\n";
  write_run_record(config, "bench", {{"fps", report.fps}, {"report", report_path}});
  return 0;
}

int cmd_ablate(const RunConfig& config, const CliOptions&) {
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  const PseudoLabelSet labels = load_pseudolabel_index(
      (std::filesystem::path(config.paths.masks_dir) / "index.jsonl").string());

  struct Row {
    std::string name;
    std::array<bool, 4> enabled;
  };
  const std::vector<Row> rows = {{"no_l0", {false, true, true, true}},
                                 {"no_l1", {true, false, true, true}},
                                 {"no_l2", {true, true, false, true}},
                                 {"no_l3", {true, true, true, false}},
                                 {"no_l2_l3", {true, true, false, false}},
                                 {"full", {true, true, true, true}}};

  const bool have_gt = !config.paths.gt_masks_dir.empty();
  std::vector<EvalItem> test_items;
  if (have_gt) test_items = collect_eval_items(manifest, Split::Test, config.paths.gt_masks_dir);

  json results = json::array();
  std::cout << "row        l0 l1 l2 l3   val mIoU";
  if (have_gt) std::cout << "   test mIoU";
  std::cout << "\n";
  for (const auto& row : rows) {
    TrainConfig train_cfg = config.train;
    train_cfg.loss.enable_l0 = row.enabled[0];
    train_cfg.loss.enable_l1 = row.enabled[1];
    train_cfg.loss.enable_l2 = row.enabled[2];
    train_cfg.loss.enable_l3 = row.enabled[3];

    auto model = reference_student(config.student);
    const std::string ckpt_dir =
        (std::filesystem::path(config.paths.checkpoints_dir) / ("ablate_" + row.name)).string();
    const TrainHistory history = train_student(*model, manifest, labels, train_cfg, ckpt_dir);
    const EpochRecord& best = select_best_checkpoint(history);

    json entry = {{"row", row.name},
                  {"enabled", row.enabled},
                  {"best_epoch", best.epoch},
                  {"val_miou", best.val_miou}};
    double test_miou = -1.0;
    if (have_gt) {
      auto best_model = student_from_checkpoint(load_checkpoint(best.checkpoint_ref));
      EvalOptions eval_options;
      eval_options.threshold = config.eval.threshold;
      eval_options.eval_height = config.train.resolution_h;
      eval_options.eval_width = config.train.resolution_w;
      test_miou = evaluate_model(*best_model, test_items, eval_options).miou;
      entry["test_miou"] = test_miou;
    }
    results.push_back(entry);

    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %2s %2s %2s %2s   %8.3f", row.name.c_str(),
                  row.enabled[0] ? "x" : "-", row.enabled[1] ? "x" : "-",
                  row.enabled[2] ? "x" : "-", row.enabled[3] ? "x" : "-", round3(best.val_miou));
    std::cout << buf;
    if (have_gt) {
      std::snprintf(buf, sizeof(buf), "   %9.3f", round3(test_miou));
      std::cout << buf;
    }
    std::cout << "\n";
  }

  const std::string report_path =
      (std::filesystem::path(config.paths.reports_dir) / "ablation_report.json").string();
  ensure_parent_dir(report_path);
  {
    std::ofstream out(report_path, std::ios::trunc);
    out << json{{"meta", {{"timestamp", iso8601_now()}}}, {"result", results}}.dump(2) << "\n";
  }
  std::cout << "report written to " << report_path << "\n";
  write_run_record(config, "ablate", {{"rows", rows.size()}, {"report", report_path}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"box-supervised smoke segmentation: distillation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opts;
  app.add_option("--config", opts.config_path, "JSON run config (defaults used when omitted)");
  app.add_option("--seed", opts.seed, "override the master seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });

  auto* import_cmd = app.add_subcommand("import", "load and validate a dataset manifest");
  import_cmd->add_option("--manifest", opts.manifest_override, "manifest path override");
  import_cmd->add_option("--out", opts.out, "write the normalized manifest here");

  auto* split_cmd =
      app.add_subcommand("split", "temporal thinning + group-disjoint train/val/test split");
  split_cmd->add_option("--manifest", opts.manifest_override, "manifest path override");
  split_cmd->add_option("--out", opts.out, "output manifest path");

  auto* pl_cmd = app.add_subcommand("pseudolabel", "generate pseudo-label masks with a teacher");
  pl_cmd->add_option("--manifest", opts.manifest_override, "manifest path override");

  auto* train_cmd = app.add_subcommand("train", "distill the student on pseudo-labels");
  train_cmd->add_option("--manifest", opts.manifest_override, "manifest path override");
  train_cmd->add_option("--epochs", opts.epochs_override, "override train.epochs");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the TEST split");
  eval_cmd->add_option("--manifest", opts.manifest_override, "manifest path override");
  eval_cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint path (default: best.json)");
  eval_cmd->add_flag("--overlays", opts.overlays, "write prediction overlays");

  auto* fp_cmd = app.add_subcommand("fp-eval", "false-positive rate on smokeless images");
  fp_cmd->add_option("--manifest", opts.manifest_override, "smokeless manifest path");
  fp_cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint path (default: best.json)");
  fp_cmd->add_option("--min-area", opts.min_area, "positive-pixel count a flag must exceed");

  auto* bench_cmd = app.add_subcommand("bench", "frame-rate measurement");
  bench_cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint path (default: best.json)");
  bench_cmd->add_flag("--random-weights", opts.random_weights,
                      "bench a freshly initialized student instead of a checkpoint");

  auto* ablate_cmd = app.add_subcommand("ablate", "loss-term ablation grid (train + eval per row)");
  ablate_cmd->add_option("--manifest", opts.manifest_override, "manifest path override");
  ablate_cmd->add_option("--epochs", opts.epochs_override, "override train.epochs per row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  RunConfig config;
  try {
    config = load_config(opts);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (import_cmd->parsed()) return cmd_import(config, opts);
    if (split_cmd->parsed()) return cmd_split(config, opts);
    if (pl_cmd->parsed()) return cmd_pseudolabel(config, opts);
    if (train_cmd->parsed()) return cmd_train(config, opts);
    if (eval_cmd->parsed()) return cmd_eval(config, opts);
    if (fp_cmd->parsed()) return cmd_fp_eval(config, opts);
    if (bench_cmd->parsed()) return cmd_bench(config, opts);
    if (ablate_cmd->parsed()) return cmd_ablate(config, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "no subcommand\n";
  return 2;
}
