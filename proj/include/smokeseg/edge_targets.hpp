#pragma once

#include "smokeseg/types.hpp"

namespace smokeseg {

// Boundary targets for the boundary head. A pixel is a transition pixel when
// any 4-neighbor has a different mask value; the image border itself is not a
// transition, so constant masks produce all-zero maps. The transition set is
// dilated with a square structuring element of radius width_px / 2, giving
// the band its thickness. On {0,255} inputs this is what a Canny pass over
// the label image reduces to, without the hysteresis parameters.
EdgeMap boundary_map(const SegMask& mask, int width_px = 3);

}  // namespace smokeseg
