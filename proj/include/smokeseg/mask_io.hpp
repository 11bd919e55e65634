#pragma once

#include <optional>
#include <string>
#include <utility>

#include <opencv2/core.hpp>

#include "smokeseg/types.hpp"

namespace smokeseg {

// Masks are stored as single-channel 8-bit images with values {0, 255};
// 255 maps to mask value 1. Write-then-read is bit-exact.

void write_mask(const SegMask& mask, const std::string& path);

// expect_dims, when given, is (width, height); a mismatch is an error.
SegMask read_mask(const std::string& path,
                  std::optional<std::pair<int, int>> expect_dims = std::nullopt);

// True if the file exists and decodes to a valid mask (of the expected dims,
// when given). Used for resumable pseudo-label jobs.
bool mask_file_valid(const std::string& path,
                     std::optional<std::pair<int, int>> expect_dims = std::nullopt);

// 3-channel 8-bit image loading for training/evaluation inputs.
cv::Mat read_image_bgr(const std::string& path);
void write_image_bgr(const cv::Mat& image, const std::string& path);

}  // namespace smokeseg
