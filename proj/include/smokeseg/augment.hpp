#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "smokeseg/types.hpp"

namespace smokeseg {

enum class AugOp {
  Crop,
  VFlip,
  Rotation,
  Perspective,
  Erasing,
  Grayscale,
  GaussianBlur,
  Inversion,
  Sharpness,
  ColorJitter
};

inline constexpr std::array<AugOp, 10> kAllAugOps = {
    AugOp::Crop,      AugOp::VFlip,        AugOp::Rotation,  AugOp::Perspective,
    AugOp::Erasing,   AugOp::Grayscale,    AugOp::GaussianBlur, AugOp::Inversion,
    AugOp::Sharpness, AugOp::ColorJitter};

const char* to_string(AugOp op);
AugOp aug_op_from_string(const std::string& s);

// One op per sample in the TrivialAugment manner: a uniformly chosen op at a
// uniform strength, plus an independent 50% horizontal flip. rng_seed drives
// the op's internal draws (crop window, erase rect, jitter factors) so a
// logged spec replays exactly.
struct AugSpec {
  AugOp op = AugOp::Crop;
  double strength = 0.0;  // in [0,1]
  bool hflip = false;
  std::uint64_t rng_seed = 0;
};

void to_json(nlohmann::json& j, const AugSpec& spec);
void from_json(const nlohmann::json& j, AugSpec& spec);

AugSpec sample_policy(std::mt19937_64& rng);

struct AugmentedSample {
  cv::Mat image;  // 8-bit 3-channel
  SegMask mask;
  EdgeMap edges;  // regenerated from the output mask
  AugSpec spec;
};

// Geometric ops (crop, vflip, rotation, perspective, hflip) transform image
// and mask identically, the mask with nearest-neighbor resampling so it stays
// binary; photometric ops and erasing touch only the image. Strength 0 (and
// parameter draws that land on identity) leave the pixels bit-exact.
AugmentedSample apply_joint_augmentation(const cv::Mat& image, const SegMask& mask,
                                         const AugSpec& spec, int edge_width_px = 3);

cv::Mat segmask_to_mat(const SegMask& mask);
SegMask mat_to_segmask(const cv::Mat& mat);

}  // namespace smokeseg
