#include "smokeseg/metrics.hpp"

#include <cmath>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "smokeseg/common.hpp"
#include "smokeseg/mask_io.hpp"

namespace smokeseg {

SegMask binarize(const Grid& prob_map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("binarize: threshold must be in (0,1)");
  SegMask out = SegMask::zeros(prob_map.width, prob_map.height);
  for (std::size_t i = 0; i < prob_map.v.size(); ++i) {
    const double p = prob_map.v[i];
    if (p < 0.0 || p > 1.0) {
      std::ostringstream os;
      os << "binarize: value " << p << " outside [0,1]";
      throw Error(os.str());
    }
    out.data[i] = p >= threshold ? 1 : 0;
  }
  return out;
}

ConfusionCounts confusion_counts(const SegMask& pred, const SegMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw Error("confusion_counts: dimension mismatch");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool g = gt.data[i] != 0;
    if (p && g) ++c.tp;
    else if (!p && !g) ++c.tn;
    else if (p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

double sample_iou(const SegMask& pred, const SegMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw Error("sample_iou: dimension mismatch");
  }
  long long inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool g = gt.data[i] != 0;
    if (p && g) ++inter;
    if (p || g) ++uni;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mean_iou(const std::vector<std::pair<SegMask, SegMask>>& pairs) {
  if (pairs.empty()) throw Error("mean_iou: empty sample list");
  double sum = 0.0;
  for (const auto& [pred, gt] : pairs) sum += sample_iou(pred, gt);
  return sum / pairs.size();
}

BinaryMetrics binary_metrics(const ConfusionCounts& c) {
  auto ratio = [](long long num, long long den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  BinaryMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

double false_positive_rate(const std::vector<SegMask>& preds, long long min_area) {
  if (preds.empty()) throw Error("false_positive_rate: empty prediction list");
  long long flagged = 0;
  for (const auto& m : preds) {
    if (m.positive_count() > min_area) ++flagged;
  }
  return static_cast<double>(flagged) / static_cast<double>(preds.size());
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

namespace {

nlohmann::json block_to_json(const MetricBlock& b) {
  return nlohmann::json{{"miou", b.miou},         {"accuracy", b.accuracy},
                        {"precision", b.precision}, {"recall", b.recall},
                        {"f1", b.f1},             {"sample_count", b.sample_count}};
}

void append_row(std::ostringstream& os, const std::string& name, const MetricBlock& b) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-16s %6.3f %9.3f %10.3f %7.3f %6.3f %8d\n", name.c_str(),
                round3(b.miou), round3(b.accuracy), round3(b.precision), round3(b.recall),
                round3(b.f1), b.sample_count);
  os << buf;
}

struct Accumulator {
  double miou = 0, acc = 0, prec = 0, rec = 0, f1 = 0;
  int n = 0;
  void add(double iou, const BinaryMetrics& m) {
    miou += iou;
    acc += m.accuracy;
    prec += m.precision;
    rec += m.recall;
    f1 += m.f1;
    ++n;
  }
  MetricBlock block() const {
    MetricBlock b;
    if (n > 0) {
      b.miou = miou / n;
      b.accuracy = acc / n;
      b.precision = prec / n;
      b.recall = rec / n;
      b.f1 = f1 / n;
    }
    b.sample_count = n;
    return b;
  }
};

}  // namespace

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j = block_to_json(report);
  j["aggregation"] = report.aggregation;
  if (report.fp_rate) j["fp_rate"] = *report.fp_rate;
  nlohmann::json per_source = nlohmann::json::object();
  for (const auto& [source, block] : report.per_source) per_source[source] = block_to_json(block);
  j["per_source"] = per_source;
  return j;
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream os;
  os << "Source             mIoU  Accuracy  Precision  Recall     F1  Samples\n";
  append_row(os, "all", report);
  for (const auto& [source, block] : report.per_source) append_row(os, source, block);
  if (report.fp_rate) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "FP rate: %.3f\n", round3(*report.fp_rate));
    os << buf;
  }
  return os.str();
}

Grid predict_probabilities(const StudentModel& model, const cv::Mat& image_bgr, int eval_height,
                           int eval_width, int out_height, int out_width) {
  const int stride = model.input_stride();
  auto snap = [stride](int d) {
    const int rounded = (d + stride / 2) / stride * stride;
    return std::max(stride, rounded);
  };
  const int h = eval_height > 0 ? eval_height : snap(image_bgr.rows);
  const int w = eval_width > 0 ? eval_width : snap(image_bgr.cols);

  cv::Mat resized = image_bgr;
  if (image_bgr.rows != h || image_bgr.cols != w) {
    cv::resize(image_bgr, resized, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
  }
  const StudentOutputs outputs = model.forward(image_to_tensor(resized));
  Grid probs = sigmoid(outputs.final_seg_logits);
  if (probs.height != out_height || probs.width != out_width) {
    probs = resize_bilinear(probs, out_height, out_width);
  }
  return probs;
}

namespace {

void write_overlay(const cv::Mat& image, const SegMask& pred, const std::string& path) {
  cv::Mat overlay = image.clone();
  for (int y = 0; y < overlay.rows && y < pred.height; ++y) {
    auto* row = overlay.ptr<cv::Vec3b>(y);
    for (int x = 0; x < overlay.cols && x < pred.width; ++x) {
      if (pred.at(x, y)) {
        row[x][1] = static_cast<std::uint8_t>(std::min(255, int(row[x][1]) / 2 + 128));
        row[x][2] = static_cast<std::uint8_t>(std::min(255, int(row[x][2]) / 2 + 128));
      }
    }
  }
  write_image_bgr(overlay, path);
}

}  // namespace

MetricsReport evaluate_model(const StudentModel& model, const std::vector<EvalItem>& items,
                             const EvalOptions& options) {
  if (items.empty()) throw Error("evaluate_model: no samples");
  Accumulator all;
  std::map<std::string, Accumulator> by_source;
  for (const auto& item : items) {
    if (item.gt.width <= 0 || item.gt.height <= 0) {
      throw Error("evaluate_model: sample '" + item.sample.id + "' has no ground-truth mask");
    }
    const cv::Mat image = read_image_bgr(item.sample.image_path);
    const Grid probs = predict_probabilities(model, image, options.eval_height,
                                             options.eval_width, item.gt.height, item.gt.width);
    const SegMask pred = binarize(probs, options.threshold);
    const double iou = sample_iou(pred, item.gt);
    const BinaryMetrics m = binary_metrics(confusion_counts(pred, item.gt));
    all.add(iou, m);
    by_source[to_string(item.sample.source)].add(iou, m);
    if (!options.overlays_dir.empty()) {
      write_overlay(image, pred,
                    (std::filesystem::path(options.overlays_dir) / (item.sample.id + "_overlay.png"))
                        .string());
    }
  }
  MetricsReport report;
  static_cast<MetricBlock&>(report) = all.block();
  for (const auto& [source, acc] : by_source) report.per_source[source] = acc.block();
  return report;
}

}  // namespace smokeseg
