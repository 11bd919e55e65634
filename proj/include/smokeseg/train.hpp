#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "smokeseg/losses.hpp"
#include "smokeseg/pseudolabel.hpp"
#include "smokeseg/student.hpp"
#include "smokeseg/types.hpp"

namespace smokeseg {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  int resolution_h = 192;
  int resolution_w = 320;
  std::uint64_t seed = 0;
  int workers = 1;       // per-batch sample parallelism; results are
                         // independent of the worker count
  int edge_width_px = 3;
  LossConfig loss;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_miou = 0.0;
  std::array<double, 4> train_components{};  // unweighted l0..l3 epoch means
  std::string checkpoint_ref;                // path of the epoch checkpoint
  std::uint64_t aug_seed = 0;                // augmentation stream seed of the epoch
};

using TrainHistory = std::vector<EpochRecord>;

void save_history(const TrainHistory& history, const std::string& path);
TrainHistory load_history(const std::string& path);

// Decoupled weight decay Adam (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamW {
 public:
  AdamW(std::size_t n_params, double learning_rate, double weight_decay);
  void step(std::span<double> params, std::span<const double> grads);

 private:
  double lr_, wd_;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

// One epoch = shuffled TRAIN minibatches with per-sample augmentation and an
// AdamW step per batch, then validation loss and validation mIoU against the
// pseudo-labels (final head binarized at 0.5). A checkpoint is written per
// epoch under out_dir. Deterministic for a fixed cfg.seed.
TrainHistory train_student(TrainableStudent& model, const DatasetManifest& manifest,
                           const PseudoLabelSet& labels, const TrainConfig& cfg,
                           const std::string& out_dir);

// Checkpoint of the epoch with maximal validation mIoU; ties go to the
// earliest epoch.
const EpochRecord& select_best_checkpoint(const TrainHistory& history);

}  // namespace smokeseg
