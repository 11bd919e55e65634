#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smokeseg/student.hpp"
#include "smokeseg/tensor.hpp"
#include "smokeseg/types.hpp"

namespace smokeseg {

struct ConfusionCounts {
  long long tp = 0, tn = 0, fp = 0, fn = 0;
  long long total() const { return tp + tn + fp + fn; }
};

struct BinaryMetrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

// Pixel -> 1 iff value >= threshold. Values must lie in [0, 1].
SegMask binarize(const Grid& prob_map, double threshold);

ConfusionCounts confusion_counts(const SegMask& pred, const SegMask& gt);

// Jaccard index of the positive sets. Both-empty pairs score 1.0 (a correct
// all-negative prediction is perfect).
double sample_iou(const SegMask& pred, const SegMask& gt);

// Unweighted mean of sample_iou over pairs -- the sample-wise mean, not the
// dataset-pooled ratio.
double mean_iou(const std::vector<std::pair<SegMask, SegMask>>& pairs);

// Accuracy, precision, recall, F1 from raw counts. Any 0/0 denominator
// yields 1.0 (no positives to find, none claimed).
BinaryMetrics binary_metrics(const ConfusionCounts& c);

// Fraction of known-smokeless images whose predicted positive-pixel count
// exceeds min_area.
double false_positive_rate(const std::vector<SegMask>& preds, long long min_area = 0);

struct MetricBlock {
  double miou = 0, accuracy = 0, precision = 0, recall = 0, f1 = 0;
  int sample_count = 0;
};

struct MetricsReport : MetricBlock {
  std::optional<double> fp_rate;
  std::map<std::string, MetricBlock> per_source;
  // All five metrics are computed per sample and then averaged, matching the
  // sample-wise mIoU definition; recorded here so reports are unambiguous.
  std::string aggregation = "per_sample_mean";
};

nlohmann::json report_to_json(const MetricsReport& report);
// Human-readable table, columns mIoU / Accuracy / Precision / Recall / F1,
// values rounded to 3 decimals.
std::string report_table(const MetricsReport& report);
double round3(double v);

struct EvalItem {
  ImageSample sample;
  SegMask gt;  // at native resolution
};

struct EvalOptions {
  double threshold = 0.5;
  // Forward resolution (height, width); 0 means: round the sample's own dims
  // to the nearest stride multiple. Probability maps are resized back to the
  // ground-truth dims before binarization.
  int eval_height = 0;
  int eval_width = 0;
  std::string overlays_dir;  // when set, writes prediction overlays here
};

// Loads each sample's image from sample.image_path, runs the student, and
// aggregates per-sample metrics plus a per-source breakdown.
MetricsReport evaluate_model(const StudentModel& model, const std::vector<EvalItem>& items,
                             const EvalOptions& options = {});

// Single-image forward: sigmoid of the final head, resized to out dims.
Grid predict_probabilities(const StudentModel& model, const cv::Mat& image_bgr, int eval_height,
                           int eval_width, int out_height, int out_width);

}  // namespace smokeseg
