#include "smokeseg/augment.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "smokeseg/common.hpp"
#include "smokeseg/edge_targets.hpp"

namespace smokeseg {

const char* to_string(AugOp op) {
  switch (op) {
    case AugOp::Crop: return "CROP";
    case AugOp::VFlip: return "VFLIP";
    case AugOp::Rotation: return "ROTATION";
    case AugOp::Perspective: return "PERSPECTIVE";
    case AugOp::Erasing: return "ERASING";
    case AugOp::Grayscale: return "GRAYSCALE";
    case AugOp::GaussianBlur: return "GAUSSIAN_BLUR";
    case AugOp::Inversion: return "INVERSION";
    case AugOp::Sharpness: return "SHARPNESS";
    case AugOp::ColorJitter: return "COLOR_JITTER";
  }
  return "CROP";
}

AugOp aug_op_from_string(const std::string& s) {
  for (AugOp op : kAllAugOps) {
    if (s == to_string(op)) return op;
  }
  throw Error("unknown augmentation op '" + s + "'");
}

void to_json(nlohmann::json& j, const AugSpec& spec) {
  j = nlohmann::json{{"op", to_string(spec.op)},
                     {"strength", spec.strength},
                     {"hflip", spec.hflip},
                     {"rng_seed", spec.rng_seed}};
}

void from_json(const nlohmann::json& j, AugSpec& spec) {
  spec.op = aug_op_from_string(j.at("op").get<std::string>());
  j.at("strength").get_to(spec.strength);
  j.at("hflip").get_to(spec.hflip);
  j.at("rng_seed").get_to(spec.rng_seed);
}

AugSpec sample_policy(std::mt19937_64& rng) {
  AugSpec spec;
  spec.op = kAllAugOps[std::uniform_int_distribution<int>(0, 9)(rng)];
  spec.strength = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  spec.hflip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  spec.rng_seed = rng();
  return spec;
}

cv::Mat segmask_to_mat(const SegMask& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(x, y);
  }
  return m;
}

SegMask mat_to_segmask(const cv::Mat& mat) {
  if (mat.type() != CV_8UC1) throw Error("mat_to_segmask: expected CV_8UC1");
  SegMask mask = SegMask::zeros(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      if (row[x] > 1) throw Error("mat_to_segmask: value outside {0,1}");
      mask.at(x, y) = row[x];
    }
  }
  return mask;
}

namespace {

cv::Mat to_float(const cv::Mat& img) {
  cv::Mat f;
  img.convertTo(f, CV_32FC3);
  return f;
}

cv::Mat to_u8(const cv::Mat& f) {
  cv::Mat u;
  f.convertTo(u, CV_8UC3);  // saturating
  return u;
}

void apply_crop(cv::Mat& image, cv::Mat& mask, double strength, std::mt19937_64& rng) {
  const int w = image.cols;
  const int h = image.rows;
  const double min_scale = 1.0 - 0.4 * strength;
  const double scale = std::uniform_real_distribution<double>(min_scale, 1.0)(rng);
  const int cw = std::max(1, static_cast<int>(std::lround(w * scale)));
  const int ch = std::max(1, static_cast<int>(std::lround(h * scale)));
  if (cw >= w && ch >= h) return;
  const int x0 = std::uniform_int_distribution<int>(0, w - cw)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, h - ch)(rng);
  const cv::Rect roi(x0, y0, cw, ch);
  // resize must not write through the ROI views into their own parent
  cv::Mat image_out, mask_out;
  cv::resize(image(roi), image_out, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
  cv::resize(mask(roi), mask_out, cv::Size(w, h), 0, 0, cv::INTER_NEAREST);
  image = image_out;
  mask = mask_out;
}

void apply_rotation(cv::Mat& image, cv::Mat& mask, double strength, std::mt19937_64& rng) {
  const double max_deg = 30.0 * strength;
  const double angle = std::uniform_real_distribution<double>(-max_deg, max_deg)(rng);
  if (angle == 0.0) return;
  const cv::Point2f center(image.cols / 2.0f, image.rows / 2.0f);
  const cv::Mat m = cv::getRotationMatrix2D(center, angle, 1.0);
  cv::Mat image_out, mask_out;
  cv::warpAffine(image, image_out, m, image.size(), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
  cv::warpAffine(mask, mask_out, m, mask.size(), cv::INTER_NEAREST, cv::BORDER_CONSTANT,
                 cv::Scalar(0));
  image = image_out;
  mask = mask_out;
}

void apply_perspective(cv::Mat& image, cv::Mat& mask, double strength, std::mt19937_64& rng) {
  const double d = 0.3 * strength;
  if (d == 0.0) return;
  const float w = static_cast<float>(image.cols);
  const float h = static_cast<float>(image.rows);
  auto jitter_x = [&]() {
    return static_cast<float>(std::uniform_real_distribution<double>(0.0, d * w / 2.0)(rng));
  };
  auto jitter_y = [&]() {
    return static_cast<float>(std::uniform_real_distribution<double>(0.0, d * h / 2.0)(rng));
  };
  const cv::Point2f src[4] = {{0, 0}, {w - 1, 0}, {w - 1, h - 1}, {0, h - 1}};
  const cv::Point2f dst[4] = {{jitter_x(), jitter_y()},
                              {w - 1 - jitter_x(), jitter_y()},
                              {w - 1 - jitter_x(), h - 1 - jitter_y()},
                              {jitter_x(), h - 1 - jitter_y()}};
  const cv::Mat m = cv::getPerspectiveTransform(src, dst);
  cv::Mat image_out, mask_out;
  cv::warpPerspective(image, image_out, m, image.size(), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
  cv::warpPerspective(mask, mask_out, m, mask.size(), cv::INTER_NEAREST, cv::BORDER_CONSTANT,
                      cv::Scalar(0));
  image = image_out;
  mask = mask_out;
}

void apply_erasing(cv::Mat& image, double strength, std::mt19937_64& rng) {
  const double max_fraction = 0.2 * strength;
  if (max_fraction <= 0.0) return;
  const double fraction = std::uniform_real_distribution<double>(0.0, max_fraction)(rng);
  const double area = fraction * image.cols * image.rows;
  if (area < 1.0) return;
  const double aspect = std::uniform_real_distribution<double>(0.3, 1.0 / 0.3)(rng);
  int ew = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, image.cols);
  int eh = std::clamp(static_cast<int>(std::lround(std::sqrt(area / aspect))), 1, image.rows);
  const int x0 = std::uniform_int_distribution<int>(0, image.cols - ew)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, image.rows - eh)(rng);
  image(cv::Rect(x0, y0, ew, eh)).setTo(cv::Scalar(0, 0, 0));
}

void apply_grayscale(cv::Mat& image) {
  cv::Mat gray;
  cv::cvtColor(image, gray, cv::COLOR_BGR2GRAY);
  cv::cvtColor(gray, image, cv::COLOR_GRAY2BGR);
}

void apply_blur(cv::Mat& image, double strength) {
  const double sigma = 2.0 * strength;
  if (sigma < 0.05) return;
  const int k = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  cv::GaussianBlur(image, image, cv::Size(k, k), sigma, sigma);
}

void apply_sharpness(cv::Mat& image, double strength) {
  if (strength <= 0.0) return;
  cv::Mat f = to_float(image);
  cv::Mat blurred;
  cv::GaussianBlur(f, blurred, cv::Size(3, 3), 1.0, 1.0);
  cv::Mat out = f + 2.0 * strength * (f - blurred);
  image = to_u8(out);
}

void apply_color_jitter(cv::Mat& image, double strength, std::mt19937_64& rng) {
  const double span = 0.5 * strength;
  auto factor = [&]() {
    return std::uniform_real_distribution<double>(std::max(0.0, 1.0 - span), 1.0 + span)(rng);
  };
  const double fb = factor();
  const double fc = factor();
  const double fs = factor();
  if (fb == 1.0 && fc == 1.0 && fs == 1.0) return;

  cv::Mat f = to_float(image);
  f *= fb;
  const double mean_gray = cv::mean(f)[0] * 0.114 + cv::mean(f)[1] * 0.587 + cv::mean(f)[2] * 0.299;
  f = (f - cv::Scalar::all(mean_gray)) * fc + cv::Scalar::all(mean_gray);
  cv::Mat gray3;
  {
    cv::Mat u = to_u8(f);
    cv::Mat gray;
    cv::cvtColor(u, gray, cv::COLOR_BGR2GRAY);
    cv::cvtColor(gray, gray3, cv::COLOR_GRAY2BGR);
    gray3.convertTo(gray3, CV_32FC3);
  }
  f = gray3 + (f - gray3) * fs;
  image = to_u8(f);
}

}  // namespace

AugmentedSample apply_joint_augmentation(const cv::Mat& image, const SegMask& mask,
                                         const AugSpec& spec, int edge_width_px) {
  if (image.empty() || image.type() != CV_8UC3) {
    throw Error("apply_joint_augmentation: expected 8-bit 3-channel image");
  }
  if (image.cols != mask.width || image.rows != mask.height) {
    throw Error("apply_joint_augmentation: image/mask dimension mismatch");
  }
  if (spec.strength < 0.0 || spec.strength > 1.0) {
    throw Error("apply_joint_augmentation: strength outside [0,1]");
  }

  std::mt19937_64 rng(spec.rng_seed);
  cv::Mat out_image = image.clone();
  cv::Mat out_mask = segmask_to_mat(mask);

  // Magnitude-free ops (vflip, grayscale, inversion) apply at any strength;
  // for the rest, strength 0 is the identity.
  const bool magnitude_free =
      spec.op == AugOp::VFlip || spec.op == AugOp::Grayscale || spec.op == AugOp::Inversion;
  if (spec.strength > 0.0 || magnitude_free) {
    switch (spec.op) {
      case AugOp::Crop: apply_crop(out_image, out_mask, spec.strength, rng); break;
      case AugOp::VFlip: {
        cv::flip(out_image, out_image, 0);
        cv::flip(out_mask, out_mask, 0);
        break;
      }
      case AugOp::Rotation: apply_rotation(out_image, out_mask, spec.strength, rng); break;
      case AugOp::Perspective: apply_perspective(out_image, out_mask, spec.strength, rng); break;
      case AugOp::Erasing: apply_erasing(out_image, spec.strength, rng); break;
      case AugOp::Grayscale: apply_grayscale(out_image); break;
      case AugOp::GaussianBlur: apply_blur(out_image, spec.strength); break;
      case AugOp::Inversion: cv::bitwise_not(out_image, out_image); break;
      case AugOp::Sharpness: apply_sharpness(out_image, spec.strength); break;
      case AugOp::ColorJitter: apply_color_jitter(out_image, spec.strength, rng); break;
    }
  }

  if (spec.hflip) {
    cv::flip(out_image, out_image, 1);
    cv::flip(out_mask, out_mask, 1);
  }

  AugmentedSample out;
  out.image = out_image;
  out.mask = mat_to_segmask(out_mask);
  out.edges = boundary_map(out.mask, edge_width_px);
  out.spec = spec;
  return out;
}

}  // namespace smokeseg
