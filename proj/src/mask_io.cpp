#include "smokeseg/mask_io.hpp"

#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "smokeseg/common.hpp"

namespace smokeseg {

void write_mask(const SegMask& mask, const std::string& path) {
  if (mask.width <= 0 || mask.height <= 0 ||
      mask.data.size() != static_cast<std::size_t>(mask.width) * mask.height) {
    throw Error("write_mask: invalid mask for " + path);
  }
  cv::Mat img(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width; ++x) {
      const std::uint8_t v = mask.at(x, y);
      if (v > 1) throw Error("write_mask: mask value outside {0,1} at " + path);
      row[x] = v ? 255 : 0;
    }
  }
  ensure_parent_dir(path);
  if (!cv::imwrite(path, img)) throw Error("write_mask: imwrite failed for " + path);
}

SegMask read_mask(const std::string& path, std::optional<std::pair<int, int>> expect_dims) {
  cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw Error("read_mask: cannot read " + path);
  if (img.channels() != 1) {
    std::ostringstream os;
    os << "read_mask: " << path << " not single-channel (" << img.channels() << " channels)";
    throw Error(os.str());
  }
  if (img.depth() != CV_8U) throw Error("read_mask: " + path + " is not 8-bit");
  if (expect_dims && (img.cols != expect_dims->first || img.rows != expect_dims->second)) {
    std::ostringstream os;
    os << "read_mask: " << path << " is " << img.cols << "x" << img.rows << ", expected "
       << expect_dims->first << "x" << expect_dims->second;
    throw Error(os.str());
  }
  SegMask mask = SegMask::zeros(img.cols, img.rows);
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.cols; ++x) {
      if (row[x] != 0 && row[x] != 255) {
        std::ostringstream os;
        os << "read_mask: " << path << " value " << int(row[x]) << " at (" << x << "," << y
           << ") outside {0,255}";
        throw Error(os.str());
      }
      mask.at(x, y) = row[x] ? 1 : 0;
    }
  }
  return mask;
}

bool mask_file_valid(const std::string& path, std::optional<std::pair<int, int>> expect_dims) {
  if (!std::filesystem::exists(path)) return false;
  try {
    read_mask(path, expect_dims);
    return true;
  } catch (const Error&) {
    return false;
  }
}

cv::Mat read_image_bgr(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
  if (img.empty()) throw Error("cannot read image: " + path);
  return img;
}

void write_image_bgr(const cv::Mat& image, const std::string& path) {
  ensure_parent_dir(path);
  if (!cv::imwrite(path, image)) throw Error("imwrite failed for " + path);
}

}  // namespace smokeseg
