#include "smokeseg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "smokeseg/common.hpp"

namespace smokeseg {

double FpsReport::mean_latency_ms() const {
  if (latencies_ms.empty()) return 0.0;
  return std::accumulate(latencies_ms.begin(), latencies_ms.end(), 0.0) / latencies_ms.size();
}

double FpsReport::compute_fps() const {
  if (compute_latencies_ms.empty()) return 0.0;
  const double total_ms =
      std::accumulate(compute_latencies_ms.begin(), compute_latencies_ms.end(), 0.0);
  return compute_latencies_ms.size() / (total_ms / 1000.0);
}

nlohmann::json FpsReport::to_json() const {
  nlohmann::json j{{"fps", fps},
                        {"iters", iters},
                        {"warmup", warmup},
                        {"input", {{"height", input_h}, {"width", input_w}, {"channels", input_c}}},
                        {"precision", precision},
                        {"device", device},
                        {"mean_latency_ms", mean_latency_ms()},
                        {"latencies_ms", latencies_ms}};
  if (!compute_latencies_ms.empty()) {
    j["compute_fps"] = compute_fps();
    j["compute_latencies_ms"] = compute_latencies_ms;
  }
  return j;
}

std::string FpsReport::table() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "Input: %dx%dx%d  Device: %s  Precision: %s\n", input_w, input_h,
                input_c, device.c_str(), precision.c_str());
  os << buf;
  std::snprintf(buf, sizeof(buf), "Warmup: %d  Iters: %d\n", warmup, iters);
  os << buf;
  std::snprintf(buf, sizeof(buf), "FPS: %.2f  Mean latency: %.3f ms\n", fps, mean_latency_ms());
  os << buf;
  if (!compute_latencies_ms.empty()) {
    std::snprintf(buf, sizeof(buf), "Compute-only FPS: %.2f\n", compute_fps());
    os << buf;
  }
  if (!latencies_ms.empty()) {
    auto sorted = latencies_ms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t p95 = std::min(sorted.size() - 1,
                                     static_cast<std::size_t>(sorted.size() * 0.95));
    std::snprintf(buf, sizeof(buf), "Latency min/p50/p95/max: %.3f / %.3f / %.3f / %.3f ms\n",
                  sorted.front(), sorted[sorted.size() / 2], sorted[p95], sorted.back());
    os << buf;
  }
  return os.str();
}

FpsReport measure_fps(InferenceRunner& runner, int input_h, int input_w, int warmup, int iters,
                      int input_c) {
  if (iters < 1) throw Error("measure_fps: iters must be >= 1");
  if (warmup < 0) throw Error("measure_fps: warmup must be >= 0");

  FpsReport report;
  report.iters = iters;
  report.warmup = warmup;
  report.input_h = input_h;
  report.input_w = input_w;
  report.input_c = input_c;
  report.precision = runner.precision_mode();
  report.device = runner.device_descriptor();

  const Tensor input = Tensor::zeros(input_c, input_h, input_w);
  using clock = std::chrono::steady_clock;

  try {
    for (int i = 0; i < warmup; ++i) runner.run(input);
    runner.synchronize();
    for (int i = 0; i < iters; ++i) {
      const auto t0 = clock::now();
      runner.run(input);
      runner.synchronize();
      const auto t1 = clock::now();
      report.latencies_ms.push_back(
          std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0).count());
      const double compute_ms = runner.last_compute_ms();
      if (compute_ms >= 0.0) report.compute_latencies_ms.push_back(compute_ms);
    }
  } catch (const std::exception& e) {
    throw BenchError(std::string("runner failed after ") +
                         std::to_string(report.latencies_ms.size()) + " measured iterations: " +
                         e.what(),
                     report);
  }

  const double total_ms = std::accumulate(report.latencies_ms.begin(), report.latencies_ms.end(),
                                          0.0);
  report.fps = iters / (total_ms / 1000.0);
  return report;
}

void write_latency_histogram_png(const FpsReport& report, const std::string& path) {
  if (report.latencies_ms.empty()) throw Error("histogram: empty latency list");
  constexpr int kBins = 24;
  constexpr int kWidth = 640;
  constexpr int kHeight = 360;
  constexpr int kMargin = 36;

  const double lo = *std::min_element(report.latencies_ms.begin(), report.latencies_ms.end());
  const double hi = *std::max_element(report.latencies_ms.begin(), report.latencies_ms.end());
  const double span = std::max(hi - lo, 1e-9);

  std::array<int, kBins> bins{};
  for (double v : report.latencies_ms) {
    int b = static_cast<int>((v - lo) / span * kBins);
    bins[std::clamp(b, 0, kBins - 1)]++;
  }
  const int peak = *std::max_element(bins.begin(), bins.end());

  cv::Mat canvas(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  const int plot_w = kWidth - 2 * kMargin;
  const int plot_h = kHeight - 2 * kMargin;
  cv::rectangle(canvas, cv::Point(kMargin, kMargin), cv::Point(kMargin + plot_w, kMargin + plot_h),
                cv::Scalar(0, 0, 0), 1);
  for (int b = 0; b < kBins; ++b) {
    const int bar_h = peak > 0 ? bins[b] * plot_h / peak : 0;
    const int x0 = kMargin + b * plot_w / kBins;
    const int x1 = kMargin + (b + 1) * plot_w / kBins - 2;
    cv::rectangle(canvas, cv::Point(x0, kMargin + plot_h - bar_h),
                  cv::Point(x1, kMargin + plot_h), cv::Scalar(180, 120, 40), cv::FILLED);
  }
  char label[96];
  std::snprintf(label, sizeof(label), "latency ms: min %.3f max %.3f  fps %.2f", lo, hi,
                report.fps);
  cv::putText(canvas, label, cv::Point(kMargin, kMargin - 10), cv::FONT_HERSHEY_SIMPLEX, 0.45,
              cv::Scalar(0, 0, 0), 1);
  ensure_parent_dir(path);
  if (!cv::imwrite(path, canvas)) throw Error("histogram: imwrite failed for " + path);
}

}  // namespace smokeseg
