#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "smokeseg/manifest.hpp"
#include "test_util.hpp"

using namespace smokeseg;
using test::TempDir;

#ifndef SMOKESEG_CLI_PATH
#define SMOKESEG_CLI_PATH "smokeseg"
#endif
#ifndef SMOKESEG_SYNTH_PATH
#define SMOKESEG_SYNTH_PATH "smokeseg-synth"
#endif
#ifndef FAKE_TEACHER_PATH
#define FAKE_TEACHER_PATH "fake_teacher"
#endif

namespace {

int run(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli: unknown subcommand and config errors exit 2") {
  CHECK(run(std::string(SMOKESEG_CLI_PATH) + " frobnicate") == 2);
  CHECK(run(std::string(SMOKESEG_CLI_PATH)) == 2);

  TempDir dir("cli");
  {
    std::ofstream out(dir.file("bad.json"));
    out << R"({"trian": {}})";
  }
  CHECK(run(std::string(SMOKESEG_CLI_PATH) + " import --config " + dir.file("bad.json")) == 2);
}

TEST_CASE("cli: runtime failure exits 1") {
  TempDir dir("cli");
  {
    std::ofstream out(dir.file("cfg.json"));
    out << R"({"paths": {"manifest": ")" << dir.file("missing.jsonl") << R"("}})";
  }
  CHECK(run(std::string(SMOKESEG_CLI_PATH) + " import --config " + dir.file("cfg.json")) == 1);
}

TEST_CASE("cli: pipeline end to end on a small synthetic dataset") {
  TempDir dir("cli_pipe");
  const std::string data = dir.file("data");
  REQUIRE(run(std::string(SMOKESEG_SYNTH_PATH) + " --out " + data +
              " --count 12 --width 48 --height 48 --seed 5 --group-size 2 --smokeless-every 6") ==
          0);

  const std::string split_manifest = dir.file("out/manifest_split.jsonl");
  nlohmann::json cfg = {
      {"seed", 5},
      {"paths",
       {{"manifest", data + "/manifest.jsonl"},
        {"masks_dir", dir.file("out/labels")},
        {"checkpoints_dir", dir.file("out/ckpt")},
        {"reports_dir", dir.file("out/reports")},
        {"gt_masks_dir", data + "/gt"}}},
      {"split", {{"ratios", {0.6, 0.2, 0.2}}}},
      {"train", {{"epochs", 2}, {"batch_size", 4}, {"resolution", {48, 48}}, {"workers", 2}}},
      {"student", {{"stem_channels", 4}, {"body_channels", 8}, {"body_convs", 1},
                   {"head_channels", 4}, {"seed", 5}}},
      {"bench", {{"warmup", 1}, {"iters", 3}, {"input", {48, 48}}}}};
  {
    std::ofstream out(dir.file("cfg.json"));
    out << cfg.dump(2);
  }
  const std::string base = std::string(SMOKESEG_CLI_PATH) + " ";
  const std::string with_cfg = " --config " + dir.file("cfg.json");

  CHECK(run(base + "import" + with_cfg) == 0);
  CHECK(run(base + "split" + with_cfg + " --out " + split_manifest) == 0);
  REQUIRE(std::filesystem::exists(split_manifest));

  // downstream stages read the split manifest
  cfg["paths"]["manifest"] = split_manifest;
  {
    std::ofstream out(dir.file("cfg.json"));
    out << cfg.dump(2);
  }

  CHECK(run(base + "pseudolabel" + with_cfg) == 0);
  CHECK(std::filesystem::exists(dir.file("out/labels/index.jsonl")));
  CHECK(run(base + "train" + with_cfg) == 0);
  CHECK(std::filesystem::exists(dir.file("out/ckpt/best.json")));
  CHECK(run(base + "eval" + with_cfg + " --overlays") == 0);
  CHECK(std::filesystem::exists(dir.file("out/reports/eval_report.json")));
  CHECK(run(base + "bench" + with_cfg) == 0);
  CHECK(std::filesystem::exists(dir.file("out/reports/bench_report.json")));
  CHECK(std::filesystem::exists(dir.file("out/reports/bench_latency_hist.png")));

  // every stage leaves a reproducibility record: config + input hashes,
  // timestamp confined to the meta block
  for (const char* stage : {"import", "split", "pseudolabel", "train", "eval", "bench"}) {
    const std::string record_path =
        dir.file(std::string("out/reports/run_record_") + stage + ".json");
    REQUIRE(std::filesystem::exists(record_path));
    std::ifstream in(record_path);
    nlohmann::json record;
    in >> record;
    CHECK(record["meta"].contains("timestamp"));
    CHECK(record["record"]["command"] == stage);
    CHECK(record["record"].contains("config"));
  }

  // eval report carries the timestamp only in the meta block, and the result
  // block is byte-identical across reruns with the same config and inputs
  std::string first_result_block;
  {
    std::ifstream in(dir.file("out/reports/eval_report.json"));
    nlohmann::json report;
    in >> report;
    CHECK(report.contains("meta"));
    CHECK(report["meta"].contains("timestamp"));
    CHECK(report.contains("result"));
    CHECK_FALSE(report["result"].dump().find("timestamp") != std::string::npos);
    CHECK(report["result"]["miou"].is_number());
    first_result_block = report["result"].dump();
  }
  CHECK(run(base + "eval" + with_cfg) == 0);
  {
    std::ifstream in(dir.file("out/reports/eval_report.json"));
    nlohmann::json report;
    in >> report;
    CHECK(report["result"].dump() == first_result_block);
  }

  // fp-eval wants smokeless samples: build one from the split manifest
  {
    DatasetManifest manifest = load_manifest(split_manifest);
    DatasetManifest smokeless;
    for (auto& s : manifest.samples) {
      if (s.boxes.empty()) smokeless.samples.push_back(s);
    }
    if (!smokeless.samples.empty()) {
      save_manifest(smokeless, dir.file("smokeless.jsonl"));
      CHECK(run(base + "fp-eval" + with_cfg + " --manifest " + dir.file("smokeless.jsonl")) == 0);
      CHECK(std::filesystem::exists(dir.file("out/reports/fp_report.json")));
    }
  }

  // an external teacher can be supplied purely through the environment
  {
    nlohmann::json ext_cfg = cfg;
    ext_cfg["teacher"] = {{"kind", "external_box_prompted"}};
    ext_cfg["paths"]["masks_dir"] = dir.file("out/labels_ext");
    std::ofstream out(dir.file("cfg_ext.json"));
    out << ext_cfg.dump(2);
    out.close();
    const std::string env = std::string("SMOKESEG_TEACHER_CMD='") + FAKE_TEACHER_PATH + " " +
                            dir.str() + "' ";
    CHECK(run(env + base + "pseudolabel --config " + dir.file("cfg_ext.json")) == 0);
    CHECK(std::filesystem::exists(dir.file("out/labels_ext/index.jsonl")));
  }

  // ablate: 5 toggle rows + the full row
  CHECK(run(base + "ablate" + with_cfg + " --epochs 1") == 0);
  {
    std::ifstream in(dir.file("out/reports/ablation_report.json"));
    nlohmann::json report;
    in >> report;
    CHECK(report["result"].size() == 6);
    std::set<std::string> names;
    for (const auto& row : report["result"]) names.insert(row["row"].get<std::string>());
    CHECK(names.count("full") == 1);
    CHECK(names.count("no_l2_l3") == 1);
  }
}
