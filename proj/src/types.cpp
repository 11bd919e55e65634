#include "smokeseg/types.hpp"

#include <sstream>

#include "smokeseg/common.hpp"

namespace smokeseg {

const char* to_string(Source s) {
  switch (s) {
    case Source::Uav: return "UAV";
    case Source::FixedCamera: return "FIXED_CAMERA";
    case Source::Other: return "OTHER";
  }
  return "OTHER";
}

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "TRAIN";
    case Split::Val: return "VAL";
    case Split::Test: return "TEST";
    case Split::Unassigned: return "UNASSIGNED";
  }
  return "UNASSIGNED";
}

Source source_from_string(const std::string& s) {
  if (s == "UAV") return Source::Uav;
  if (s == "FIXED_CAMERA") return Source::FixedCamera;
  if (s == "OTHER") return Source::Other;
  throw Error("unknown source '" + s + "' (expected UAV, FIXED_CAMERA or OTHER)");
}

Split split_from_string(const std::string& s) {
  if (s == "TRAIN") return Split::Train;
  if (s == "VAL") return Split::Val;
  if (s == "TEST") return Split::Test;
  if (s == "UNASSIGNED") return Split::Unassigned;
  throw Error("unknown split '" + s + "' (expected TRAIN, VAL, TEST or UNASSIGNED)");
}

const ImageSample& validate_sample(const ImageSample& sample, int image_width, int image_height) {
  if (sample.id.empty()) throw Error("sample with empty id");
  if (image_width <= 0 || image_height <= 0) {
    std::ostringstream os;
    os << "sample '" << sample.id << "': non-positive image dims " << image_width << "x"
       << image_height;
    throw Error(os.str());
  }
  for (std::size_t i = 0; i < sample.boxes.size(); ++i) {
    const BoxAnnotation& b = sample.boxes[i];
    std::ostringstream os;
    os << "sample '" << sample.id << "': box " << i << " ";
    if (b.x_min >= b.x_max || b.y_min >= b.y_max) {
      os << "degenerate (x " << b.x_min << ".." << b.x_max << ", y " << b.y_min << ".." << b.y_max
         << ")";
      throw Error(os.str());
    }
    if (b.x_min < 0 || b.y_min < 0 || b.x_max > image_width || b.y_max > image_height) {
      os << "out of bounds (x " << b.x_min << ".." << b.x_max << ", y " << b.y_min << ".."
         << b.y_max << " vs image " << image_width << "x" << image_height << ")";
      throw Error(os.str());
    }
  }
  if (sample.source == Source::Uav && !sample.timestamp.has_value()) {
    throw Error("sample '" + sample.id + "': timestamp required for temporal thinning");
  }
  return sample;
}

}  // namespace smokeseg
