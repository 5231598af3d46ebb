#pragma once

#include "ebda/video.hpp"

namespace ebda {

// 4:2:0 -> 4:4:4 by nearest-neighbour (2x2 replication) chroma upsampling.
// A 4:4:4 input is returned unchanged and `already_444`, when given, is set.
Frame yuv420_to_444(const Frame& frame, bool* already_444 = nullptr);

// 4:4:4 -> 4:2:0 by 2x2 chroma mean, rounded half away from zero. Exact
// inverse of yuv420_to_444.
Frame yuv444_to_420(const Frame& frame);

Plane upsample_chroma_2x(const Plane& plane);
Plane downsample_chroma_2x(const Plane& plane);

}  // namespace ebda
