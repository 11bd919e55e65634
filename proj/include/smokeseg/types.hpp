#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace smokeseg {

enum class Source { Uav, FixedCamera, Other };
enum class Split { Train, Val, Test, Unassigned };

const char* to_string(Source s);
const char* to_string(Split s);
Source source_from_string(const std::string& s);
Split split_from_string(const std::string& s);

// Pixel box, origin top-left, half-open on the max edges:
// [x_min, x_max) x [y_min, y_max).
struct BoxAnnotation {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  long long area() const { return static_cast<long long>(width()) * height(); }
  bool operator==(const BoxAnnotation&) const = default;
};

struct ImageSample {
  std::string id;
  std::string image_path;
  int width = 0;
  int height = 0;
  std::vector<BoxAnnotation> boxes;
  Source source = Source::Other;
  std::string group_key;
  std::optional<double> timestamp;  // seconds since epoch
  Split split = Split::Unassigned;
};

// Binary per-pixel mask, row-major, 1 = smoke.
struct SegMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  static SegMask zeros(int width, int height) {
    return SegMask{width, height,
                   std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return data.size(); }
  long long positive_count() const {
    long long n = 0;
    for (auto v : data) n += v;
    return n;
  }
  bool operator==(const SegMask&) const = default;
};

// Binary boundary-target map, 1 = boundary band. Same layout as SegMask but
// kept a distinct type so a label mask cannot silently stand in for an edge
// target.
struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  static EdgeMap zeros(int width, int height) {
    return EdgeMap{width, height,
                   std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  long long positive_count() const {
    long long n = 0;
    for (auto v : data) n += v;
    return n;
  }
  bool operator==(const EdgeMap&) const = default;
};

struct DatasetManifest {
  std::vector<ImageSample> samples;
  std::string version = "1";
  // Optional per-split totals declared in the manifest header (train, val,
  // test); checked against actual tallies on load.
  std::optional<std::array<int, 3>> declared_counts;
};

// Throws if any invariant fails: box bounds against the given image dims,
// half-open ordering, UAV timestamp presence. Returns the sample unchanged.
const ImageSample& validate_sample(const ImageSample& sample, int image_width, int image_height);

}  // namespace smokeseg
