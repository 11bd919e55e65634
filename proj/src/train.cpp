#include "smokeseg/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <opencv2/imgproc.hpp>

#include "smokeseg/augment.hpp"
#include "smokeseg/common.hpp"
#include "smokeseg/edge_targets.hpp"
#include "smokeseg/mask_io.hpp"
#include "smokeseg/metrics.hpp"

namespace smokeseg {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"weight_decay", c.weight_decay},
                     {"resolution_h", c.resolution_h},
                     {"resolution_w", c.resolution_w},
                     {"seed", c.seed},
                     {"workers", c.workers},
                     {"edge_width_px", c.edge_width_px},
                     {"loss", c.loss}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("epochs").get_to(c.epochs);
  j.at("batch_size").get_to(c.batch_size);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("resolution_h").get_to(c.resolution_h);
  j.at("resolution_w").get_to(c.resolution_w);
  j.at("seed").get_to(c.seed);
  j.at("workers").get_to(c.workers);
  j.at("edge_width_px").get_to(c.edge_width_px);
  j.at("loss").get_to(c.loss);
}

AdamW::AdamW(std::size_t n_params, double learning_rate, double weight_decay)
    : lr_(learning_rate), wd_(weight_decay), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw Error("AdamW::step: size mismatch");
  }
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * g * g;
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= lr_ * (m_hat / (std::sqrt(v_hat) + eps) + wd_ * params[i]);
  }
}

namespace {

struct CachedSample {
  std::string id;
  cv::Mat image;  // at training resolution
  SegMask mask;   // at training resolution
};

CachedSample load_cached(const ImageSample& sample, const PseudoLabelSet& labels,
                         const TrainConfig& cfg) {
  CachedSample out;
  out.id = sample.id;
  cv::Mat image = read_image_bgr(sample.image_path);
  if (image.rows != cfg.resolution_h || image.cols != cfg.resolution_w) {
    cv::resize(image, image, cv::Size(cfg.resolution_w, cfg.resolution_h), 0, 0, cv::INTER_LINEAR);
  }
  out.image = image;
  SegMask mask = read_mask(labels.mask_full_path(sample.id));
  if (mask.height != cfg.resolution_h || mask.width != cfg.resolution_w) {
    cv::Mat m = segmask_to_mat(mask);
    cv::resize(m, m, cv::Size(cfg.resolution_w, cfg.resolution_h), 0, 0, cv::INTER_NEAREST);
    mask = mat_to_segmask(m);
  }
  out.mask = mask;
  return out;
}

struct SampleResult {
  LossBreakdown loss;
};

}  // namespace

TrainHistory train_student(TrainableStudent& model, const DatasetManifest& manifest,
                           const PseudoLabelSet& labels, const TrainConfig& cfg,
                           const std::string& out_dir) {
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw Error("train_student: epochs and batch_size must be positive");
  }
  if (cfg.resolution_h % model.input_stride() != 0 ||
      cfg.resolution_w % model.input_stride() != 0) {
    std::ostringstream os;
    os << "train_student: resolution " << cfg.resolution_w << "x" << cfg.resolution_h
       << " not divisible by student stride " << model.input_stride();
    throw Error(os.str());
  }

  std::vector<const ImageSample*> train_samples;
  std::vector<const ImageSample*> val_samples;
  for (const auto& s : manifest.samples) {
    if (s.split == Split::Train) train_samples.push_back(&s);
    if (s.split == Split::Val) val_samples.push_back(&s);
  }
  if (train_samples.empty()) throw Error("train_student: no TRAIN samples");
  for (const auto* s : train_samples) labels.mask_full_path(s->id);  // throws when missing
  for (const auto* s : val_samples) labels.mask_full_path(s->id);

  // Desk-scale datasets fit in memory; cache everything at train resolution.
  std::vector<CachedSample> train_cache;
  train_cache.reserve(train_samples.size());
  for (const auto* s : train_samples) train_cache.push_back(load_cached(*s, labels, cfg));

  struct ValSample {
    Tensor input;
    SegMask mask;
    EdgeMap edges;
  };
  std::vector<ValSample> val_cache;
  for (const auto* s : val_samples) {
    CachedSample c = load_cached(*s, labels, cfg);
    val_cache.push_back(
        {image_to_tensor(c.image), c.mask, boundary_map(c.mask, cfg.edge_width_px)});
  }

  const std::size_t n_params = model.parameter_count();
  AdamW optimizer(n_params, cfg.learning_rate, cfg.weight_decay);
  auto* reference = dynamic_cast<ReferenceStudent*>(&model);

  ensure_dir(out_dir);
  TrainHistory history;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::uint64_t epoch_aug_seed = combine_seeds(cfg.seed, 2ull * epoch + 1);
    std::vector<std::size_t> order(train_cache.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 shuffle_rng(combine_seeds(cfg.seed, 2ull * epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::array<double, 4> epoch_components{};
    std::size_t seen = 0;

    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += cfg.batch_size) {
      const std::size_t batch_n =
          std::min<std::size_t>(cfg.batch_size, order.size() - batch_start);

      std::vector<std::vector<double>> grads(batch_n, std::vector<double>(n_params, 0.0));
      std::vector<SampleResult> results(batch_n);
      std::vector<std::string> failures(batch_n);

      auto process = [&](std::size_t k) {
        const CachedSample& base = train_cache[order[batch_start + k]];
        // Per-position seeding keeps the augmentation stream independent of
        // worker scheduling.
        std::mt19937_64 policy_rng(combine_seeds(epoch_aug_seed, batch_start + k));
        const AugSpec spec = sample_policy(policy_rng);
        const AugmentedSample aug =
            apply_joint_augmentation(base.image, base.mask, spec, cfg.edge_width_px);
        auto [outputs, cache] = model.forward_train(image_to_tensor(aug.image));
        StudentOutputs output_grads;
        results[k].loss =
            total_loss_with_grad(outputs, aug.mask, aug.edges, cfg.loss, output_grads);
        model.backward(*cache, output_grads, grads[k]);
      };

      const int n_workers = std::clamp<int>(cfg.workers, 1, static_cast<int>(batch_n));
      if (n_workers == 1) {
        for (std::size_t k = 0; k < batch_n; ++k) process(k);
      } else {
        std::atomic<std::size_t> next{0};
        auto run = [&]() {
          for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= batch_n) return;
            try {
              process(k);
            } catch (const std::exception& e) {
              failures[k] = e.what();
            }
          }
        };
        std::vector<std::thread> threads;
        for (int t = 0; t < n_workers; ++t) threads.emplace_back(run);
        for (auto& t : threads) t.join();
        for (const auto& f : failures) {
          if (!f.empty()) throw Error("train_student: " + f);
        }
      }

      // Fixed-order reduction, then one optimizer step on the batch mean.
      std::vector<double> batch_grad(n_params, 0.0);
      for (std::size_t k = 0; k < batch_n; ++k) {
        const double inv = 1.0 / static_cast<double>(batch_n);
        for (std::size_t i = 0; i < n_params; ++i) batch_grad[i] += inv * grads[k][i];
        const auto& loss = results[k].loss;
        if (!std::isfinite(loss.total)) {
          std::ostringstream os;
          os << "train_student: non-finite loss at epoch " << epoch << ", step "
             << (batch_start / cfg.batch_size) << ", sample "
             << train_cache[order[batch_start + k]].id;
          throw Error(os.str());
        }
        epoch_loss += loss.total;
        for (int i = 0; i < 4; ++i) epoch_components[i] += loss.components[i];
        ++seen;
      }
      optimizer.step(model.parameters(), batch_grad);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.aug_seed = epoch_aug_seed;
    record.train_loss = epoch_loss / static_cast<double>(seen);
    for (int i = 0; i < 4; ++i) record.train_components[i] = epoch_components[i] / seen;

    double val_loss = 0.0;
    double val_iou = 0.0;
    for (const auto& v : val_cache) {
      const StudentOutputs outputs = model.forward(v.input);
      val_loss += total_loss(outputs, v.mask, v.edges, cfg.loss).total;
      const SegMask pred = binarize(sigmoid(outputs.final_seg_logits), 0.5);
      val_iou += sample_iou(pred, v.mask);
    }
    if (!val_cache.empty()) {
      record.val_loss = val_loss / val_cache.size();
      record.val_miou = val_iou / val_cache.size();
    }

    if (reference) {
      nlohmann::json meta = {{"epoch", epoch},
                             {"train_config", cfg},
                             {"val_miou", record.val_miou},
                             {"aug_seed", record.aug_seed}};
      record.checkpoint_ref = save_checkpoint(out_dir, *reference, meta);
    }
    history.push_back(std::move(record));
  }

  save_history(history, (std::filesystem::path(out_dir) / "history.jsonl").string());
  return history;
}

const EpochRecord& select_best_checkpoint(const TrainHistory& history) {
  if (history.empty()) throw Error("select_best_checkpoint: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].val_miou > history[best].val_miou) best = i;
  }
  return history[best];
}

void save_history(const TrainHistory& history, const std::string& path) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write training history: " + path);
  for (const auto& r : history) {
    nlohmann::json j = {{"epoch", r.epoch},
                        {"train_loss", r.train_loss},
                        {"val_loss", r.val_loss},
                        {"val_miou", r.val_miou},
                        {"train_components", r.train_components},
                        {"checkpoint", r.checkpoint_ref},
                        {"aug_seed", r.aug_seed}};
    out << j.dump() << "\n";
  }
}

TrainHistory load_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("training history not found: " + path);
  TrainHistory history;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.train_loss = j.at("train_loss").get<double>();
    r.val_loss = j.at("val_loss").get<double>();
    r.val_miou = j.at("val_miou").get<double>();
    r.train_components = j.at("train_components").get<std::array<double, 4>>();
    r.checkpoint_ref = j.at("checkpoint").get<std::string>();
    r.aug_seed = j.at("aug_seed").get<std::uint64_t>();
    history.push_back(std::move(r));
  }
  return history;
}

}  // namespace smokeseg
