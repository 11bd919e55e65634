#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "smokeseg/common.hpp"
#include "smokeseg/student.hpp"
#include "smokeseg/tensor.hpp"

namespace smokeseg {

// Anything that can run one fixed-size forward pass. Device synchronization
// is the runner's responsibility; the harness calls synchronize() around
// every timing read and the default is a no-op (correct for CPU backends).
class InferenceRunner {
 public:
  virtual ~InferenceRunner() = default;
  virtual void run(const Tensor& input) = 0;
  virtual void synchronize() {}
  // Compute-only time of the last run() for backends whose end-to-end time
  // includes host<->device transfers; < 0 means the runner has no such split
  // and only end-to-end timings are reported.
  virtual double last_compute_ms() const { return -1.0; }
  virtual std::string device_descriptor() const { return "cpu"; }
  virtual std::string precision_mode() const { return "fp64"; }
};

class StudentRunner final : public InferenceRunner {
 public:
  explicit StudentRunner(const StudentModel& model) : model_(model) {}
  void run(const Tensor& input) override { model_.forward(input); }
  std::string device_descriptor() const override { return "cpu:" + model_.descriptor(); }

 private:
  const StudentModel& model_;
};

struct FpsReport {
  double fps = 0.0;  // iters / total measured wall time
  int iters = 0;
  int warmup = 0;
  int input_h = 0, input_w = 0, input_c = 3;
  std::string precision;
  std::string device;
  std::vector<double> latencies_ms;          // one entry per measured iteration
  std::vector<double> compute_latencies_ms;  // only when the runner exposes the split

  double mean_latency_ms() const;
  double compute_fps() const;  // 0 when no compute-only timings exist
  nlohmann::json to_json() const;
  std::string table() const;
};

// Thrown when the runner fails mid-run; carries the latencies gathered so far.
class BenchError : public Error {
 public:
  BenchError(const std::string& what, FpsReport partial)
      : Error(what), partial_report(std::move(partial)) {}
  FpsReport partial_report;
};

// Runs `warmup` unmeasured iterations, then times `iters` consecutive
// forwards on a zeroed input of the given size, synchronizing before and
// after every timing read.
FpsReport measure_fps(InferenceRunner& runner, int input_h, int input_w, int warmup = 10,
                      int iters = 100, int input_c = 3);

// Simple bar-chart rendering of the latency distribution.
void write_latency_histogram_png(const FpsReport& report, const std::string& path);

}  // namespace smokeseg
