#pragma once

#include "ebda/video.hpp"

#include <filesystem>

namespace ebda {

// Dense per-pixel displacement. A sample at (x, y) of the target maps to
// (x + u, y + v) in the reference.
struct FlowField {
  PlaneF u;
  PlaneF v;

  static FlowField zeros(int width, int height);

  int width() const { return static_cast<int>(u.cols()); }
  int height() const { return static_cast<int>(u.rows()); }
};

struct FlowParams {
  int pyramid_levels = 4;
  int patch_size = 8;
  int patch_stride = 4;
  int iterations_per_patch = 12;
  double downscale_factor = 0.5;

  void validate() const;
};

// Coarse-to-fine patch-based inverse compositional search with weighted
// patch densification. Returns the flow such that warp(reference, flow)
// approximates target. `bit_depth` sets the intensity scale of the inputs.
FlowField estimate_flow(const Plane& reference_luma, const Plane& target_luma,
                        const FlowParams& params, int bit_depth = 10);

// Same estimator on float planes whose intensities are already in [0, 255].
FlowField estimate_flow(const PlaneF& reference, const PlaneF& target, const FlowParams& params);

// Bilinear, clamp-to-edge sampling of `plane` at (x + u, y + v).
PlaneF warp_plane(const PlaneF& plane, const PlaneF& u, const PlaneF& v);
Plane warp_plane(const Plane& plane, const PlaneF& u, const PlaneF& v);

// Warps every plane of `frame`. For 4:2:0, chroma uses the 2x2-averaged
// flow scaled by one half.
Frame warp_frame(const Frame& frame, const FlowField& flow);

// Debug dump: u32 width, u32 height, then float32 (u, v) pairs per pixel,
// row-major, all little-endian.
void write_flow(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow(const std::filesystem::path& path);

}  // namespace ebda
