#include "smokeseg/edge_targets.hpp"

#include <algorithm>

#include "smokeseg/common.hpp"

namespace smokeseg {

EdgeMap boundary_map(const SegMask& mask, int width_px) {
  if (width_px < 1) throw Error("boundary_map: width_px must be >= 1");
  if (mask.width <= 0 || mask.height <= 0 ||
      mask.data.size() != static_cast<std::size_t>(mask.width) * mask.height) {
    throw Error("boundary_map: invalid mask");
  }
  const int w = mask.width;
  const int h = mask.height;

  EdgeMap transitions = EdgeMap::zeros(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = mask.at(x, y);
      const bool differs = (x > 0 && mask.at(x - 1, y) != v) ||
                           (x + 1 < w && mask.at(x + 1, y) != v) ||
                           (y > 0 && mask.at(x, y - 1) != v) ||
                           (y + 1 < h && mask.at(x, y + 1) != v);
      if (differs) transitions.at(x, y) = 1;
    }
  }

  const int radius = width_px / 2;
  if (radius == 0) return transitions;

  // Separable square dilation: horizontal max filter, then vertical.
  EdgeMap horiz = EdgeMap::zeros(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(w - 1, x + radius);
      std::uint8_t v = 0;
      for (int xx = x0; xx <= x1 && !v; ++xx) v = transitions.at(xx, y);
      horiz.at(x, y) = v;
    }
  }
  EdgeMap out = EdgeMap::zeros(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int y0 = std::max(0, y - radius);
      const int y1 = std::min(h - 1, y + radius);
      std::uint8_t v = 0;
      for (int yy = y0; yy <= y1 && !v; ++yy) v = horiz.at(x, yy);
      out.at(x, y) = v;
    }
  }
  return out;
}

}  // namespace smokeseg
