#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smokeseg/tensor.hpp"

namespace smokeseg {

// The three head outputs, all logit grids at the input resolution.
struct StudentOutputs {
  Grid aux_seg_logits;
  Grid final_seg_logits;
  Grid boundary_logits;
};

class StudentModel {
 public:
  virtual ~StudentModel() = default;
  virtual StudentOutputs forward(const Tensor& image) const = 0;
  virtual std::string descriptor() const = 0;
  // Input height and width must be divisible by this.
  virtual int input_stride() const = 0;
};

// Opaque per-call activation cache; owned by the caller between
// forward_train and backward so forwards can run concurrently.
struct ForwardCache {
  virtual ~ForwardCache() = default;

 protected:
  ForwardCache() = default;
};

class TrainableStudent : public StudentModel {
 public:
  virtual std::size_t parameter_count() const = 0;
  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;
  virtual std::pair<StudentOutputs, std::unique_ptr<ForwardCache>> forward_train(
      const Tensor& image) const = 0;
  // output_grads reuses the StudentOutputs grids as dLoss/dLogits.
  // Accumulates into param_grads, which must have parameter_count() entries.
  virtual void backward(const ForwardCache& cache, const StudentOutputs& output_grads,
                        std::span<double> param_grads) const = 0;
};

struct StudentConfig {
  int stem_channels = 16;
  int body_channels = 32;
  int body_convs = 4;  // includes the stride-2 trunk conv; ~47k params total
  int head_channels = 16;
  std::uint64_t seed = 0;

  bool operator==(const StudentConfig&) const = default;
};

void to_json(nlohmann::json& j, const StudentConfig& c);
void from_json(const nlohmann::json& j, StudentConfig& c);

// Small fully-convolutional three-headed network. Trunk downsamples by 4
// (two stride-2 convs), heads predict at trunk resolution and are upsampled
// bilinearly back to the input resolution. Seeded He init.
class ReferenceStudent final : public TrainableStudent {
 public:
  explicit ReferenceStudent(const StudentConfig& config = {});

  StudentOutputs forward(const Tensor& image) const override;
  std::string descriptor() const override;
  int input_stride() const override { return 4; }

  std::size_t parameter_count() const override { return params_.size(); }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  std::pair<StudentOutputs, std::unique_ptr<ForwardCache>> forward_train(
      const Tensor& image) const override;
  void backward(const ForwardCache& cache, const StudentOutputs& output_grads,
                std::span<double> param_grads) const override;

  const StudentConfig& config() const { return config_; }

  // Offset of the bias of a head's logit conv in the flat parameter vector;
  // head 0 = aux, 1 = final, 2 = boundary. Exposed for targeted tests.
  std::size_t head_logit_bias_offset(int head) const;

 private:
  struct LayerSpec {
    int in_c, out_c, stride;
    std::size_t w_off, b_off;
  };

  StudentConfig config_;
  std::vector<LayerSpec> trunk_;                 // stem + body convs
  std::vector<std::array<LayerSpec, 2>> heads_;  // aux, final, boundary
  std::vector<double> params_;
};

std::unique_ptr<ReferenceStudent> reference_student(const StudentConfig& config = {});

// Checkpoint file: "SSCK1\n", one JSON meta line (student config, epoch
// metadata, caller-supplied extras), then raw little-endian doubles.
// The filename carries a content hash over the whole payload.
struct Checkpoint {
  StudentConfig student;
  std::vector<double> params;
  nlohmann::json meta;
  std::string content_hash;
};

std::string save_checkpoint(const std::string& dir, const ReferenceStudent& model,
                            const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::string& path);
std::unique_ptr<ReferenceStudent> student_from_checkpoint(const Checkpoint& ckpt);

}  // namespace smokeseg
