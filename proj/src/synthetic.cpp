#include "smokeseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <opencv2/core.hpp>

#include "smokeseg/common.hpp"
#include "smokeseg/manifest.hpp"
#include "smokeseg/mask_io.hpp"

namespace smokeseg {
namespace {

struct GaussKernel {
  double cx, cy, sx, sy, amp;
};

struct Puff {
  std::vector<GaussKernel> kernels;
  SegMask mask;
  BoxAnnotation box;
  double fill_ratio = 0.0;
};

double field_at(const std::vector<GaussKernel>& kernels, double x, double y) {
  double f = 0.0;
  for (const auto& k : kernels) {
    const double dx = (x - k.cx) / k.sx;
    const double dy = (y - k.cy) / k.sy;
    f += k.amp * std::exp(-0.5 * (dx * dx + dy * dy));
  }
  return f;
}

// One puff: corner kernels on a jittered rectangle plus centre fill, so the
// thresholded field covers most of its own tight bounding box.
Puff make_puff(int img_w, int img_h, std::mt19937_64& rng, double min_fill, double max_fill) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Puff best;

  for (int attempt = 0; attempt < 200; ++attempt) {
    const double rw = 24 + unit(rng) * (img_w * 0.45 - 24);
    const double rh = 24 + unit(rng) * (img_h * 0.45 - 24);
    const double x0 = 4 + unit(rng) * (img_w - rw - 8);
    const double y0 = 4 + unit(rng) * (img_h - rh - 8);

    std::vector<GaussKernel> kernels;
    const double sx = rw * (0.26 + 0.06 * unit(rng));
    const double sy = rh * (0.26 + 0.06 * unit(rng));
    for (int cy = 0; cy < 2; ++cy) {
      for (int cx = 0; cx < 2; ++cx) {
        kernels.push_back({x0 + rw * (0.27 + 0.46 * cx) + (unit(rng) - 0.5) * rw * 0.08,
                           y0 + rh * (0.27 + 0.46 * cy) + (unit(rng) - 0.5) * rh * 0.08, sx, sy,
                           0.85 + 0.2 * unit(rng)});
      }
    }
    kernels.push_back({x0 + rw * 0.5, y0 + rh * 0.5, sx * 1.15, sy * 1.15, 0.9});

    SegMask mask = SegMask::zeros(img_w, img_h);
    int min_x = img_w, min_y = img_h, max_x = -1, max_y = -1;
    long long area = 0;
    for (int y = 0; y < img_h; ++y) {
      for (int x = 0; x < img_w; ++x) {
        if (field_at(kernels, x + 0.5, y + 0.5) > 1.0) {
          mask.at(x, y) = 1;
          ++area;
          min_x = std::min(min_x, x);
          min_y = std::min(min_y, y);
          max_x = std::max(max_x, x);
          max_y = std::max(max_y, y);
        }
      }
    }
    if (area < 140 || max_x < 0) continue;

    Puff puff;
    puff.kernels = std::move(kernels);
    puff.mask = std::move(mask);
    puff.box = BoxAnnotation{min_x, min_y, max_x + 1, max_y + 1};
    puff.fill_ratio = static_cast<double>(area) / puff.box.area();
    if (puff.fill_ratio >= min_fill && puff.fill_ratio <= max_fill) return puff;
    if (puff.fill_ratio > best.fill_ratio) best = std::move(puff);
  }
  if (best.fill_ratio <= 0.0) throw Error("synthetic: could not sample a smoke puff");
  return best;
}

cv::Mat render_background(int img_w, int img_h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double phase_a = unit(rng) * 6.28;
  const double phase_b = unit(rng) * 6.28;
  const double freq_a = 0.04 + 0.08 * unit(rng);
  const double freq_b = 0.05 + 0.09 * unit(rng);
  const double base_g = 70 + 40 * unit(rng);
  std::normal_distribution<double> noise(0.0, 7.0);

  cv::Mat img(img_h, img_w, CV_8UC3);
  for (int y = 0; y < img_h; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img_w; ++x) {
      const double terrain = 18.0 * std::sin(freq_a * x + phase_a) +
                             14.0 * std::sin(freq_b * y + phase_b) +
                             9.0 * std::sin(0.11 * (x + y) + phase_a * 0.5);
      const double g = std::clamp(base_g + terrain + noise(rng), 0.0, 255.0);
      const double b = std::clamp(g * 0.55 + noise(rng) * 0.5, 0.0, 255.0);
      const double r = std::clamp(g * 0.75 + noise(rng) * 0.5, 0.0, 255.0);
      row[x] = cv::Vec3b(static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(g),
                         static_cast<std::uint8_t>(r));
    }
  }
  return img;
}

void render_smoke(cv::Mat& img, const std::vector<Puff>& puffs, std::mt19937_64& rng) {
  std::normal_distribution<double> tint(0.0, 4.0);
  for (int y = 0; y < img.rows; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      double f = 0.0;
      for (const auto& puff : puffs) f += field_at(puff.kernels, x + 0.5, y + 0.5);
      if (f < 0.05) continue;
      const double alpha = std::min(0.92, f / (f + 0.45));
      const double smoke = std::clamp(225.0 + tint(rng), 195.0, 250.0);
      for (int c = 0; c < 3; ++c) {
        row[x][c] = static_cast<std::uint8_t>(
            std::clamp((1.0 - alpha) * row[x][c] + alpha * smoke, 0.0, 255.0));
      }
    }
  }
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& config,
                                            const std::string& out_dir) {
  if (config.count < 1 || config.width < 32 || config.height < 32) {
    throw Error("synthetic: need count >= 1 and dims >= 32");
  }
  SyntheticDataset out;
  out.images_dir = (std::filesystem::path(out_dir) / "images").string();
  out.gt_dir = (std::filesystem::path(out_dir) / "gt").string();
  out.manifest_path = (std::filesystem::path(out_dir) / "manifest.jsonl").string();
  ensure_dir(out.images_dir);
  ensure_dir(out.gt_dir);

  for (int i = 0; i < config.count; ++i) {
    std::mt19937_64 rng(combine_seeds(config.seed, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "synth_%04d", i);
    const std::string id = id_buf;

    const bool smokeless = config.smokeless_every > 0 && (i % config.smokeless_every) ==
                                                             config.smokeless_every - 1;
    std::vector<Puff> puffs;
    if (!smokeless) {
      const int n_puffs = unit(rng) < 0.3 ? 2 : 1;
      for (int p = 0; p < n_puffs; ++p) {
        puffs.push_back(make_puff(config.width, config.height, rng, config.min_fill_ratio,
                                  config.max_fill_ratio));
      }
    }

    cv::Mat image = render_background(config.width, config.height, rng);
    if (!puffs.empty()) render_smoke(image, puffs, rng);

    SegMask gt = SegMask::zeros(config.width, config.height);
    for (const auto& puff : puffs) {
      for (std::size_t p = 0; p < gt.data.size(); ++p) {
        if (puff.mask.data[p]) gt.data[p] = 1;
      }
    }

    const std::string image_path =
        (std::filesystem::path(out.images_dir) / (id + ".png")).string();
    write_image_bgr(image, image_path);
    write_mask(gt, (std::filesystem::path(out.gt_dir) / (id + ".png")).string());

    ImageSample sample;
    sample.id = id;
    sample.image_path = image_path;
    sample.width = config.width;
    sample.height = config.height;
    for (const auto& puff : puffs) sample.boxes.push_back(puff.box);
    const int group = config.group_size > 0 ? i / config.group_size : i;
    char group_buf[32];
    std::snprintf(group_buf, sizeof(group_buf), "scene_%03d", group);
    sample.group_key = group_buf;
    if (group % 2 == 0) {
      sample.source = Source::Uav;
      sample.timestamp = 1.7e9 + 150.0 * i;  // spaced past any thinning gap
    } else {
      sample.source = Source::FixedCamera;
    }
    out.manifest.samples.push_back(std::move(sample));
  }

  save_manifest(out.manifest, out.manifest_path);
  return out;
}

}  // namespace smokeseg
