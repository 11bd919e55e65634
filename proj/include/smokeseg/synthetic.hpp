#pragma once

#include <cstdint>
#include <string>

#include "smokeseg/types.hpp"

namespace smokeseg {

// Desk-scale stand-in data: bright smoke-like blobs (Gaussian kernel
// mixtures) composited over a textured terrain background, with exact
// ground-truth masks and tight bounding boxes. Blobs are rejection-sampled
// until they fill most of their tight box, so box-shaped pseudo-labels stay
// close to the true masks.
struct SyntheticConfig {
  int count = 50;
  int width = 96;
  int height = 96;
  std::uint64_t seed = 1234;
  int smokeless_every = 16;  // every k-th image has no smoke; 0 disables
  int group_size = 5;        // consecutive samples sharing a group_key
  double min_fill_ratio = 0.85;
  double max_fill_ratio = 0.97;
};

struct SyntheticDataset {
  DatasetManifest manifest;
  std::string manifest_path;
  std::string images_dir;
  std::string gt_dir;  // true masks, one per sample id
};

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& config,
                                            const std::string& out_dir);

}  // namespace smokeseg
