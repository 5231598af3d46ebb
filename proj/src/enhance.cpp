#include "ebda/chroma.hpp"
#include "ebda/ebd_adapt.hpp"
#include "ebda/errors.hpp"
#include "ebda/mfrnet.hpp"

#include <algorithm>
#include <cmath>

namespace ebda {
namespace {

std::vector<int> tile_origins(int extent, int tile, int stride) {
  std::vector<int> origins;
  for (int o = 0;; o += stride) {
    if (o + tile >= extent) {
      origins.push_back(extent - tile);
      break;
    }
    origins.push_back(o);
  }
  return origins;
}

// Cross-fade weight of sample `i` in a tile spanning [origin, origin + len)
// of an axis of length `extent`. Edges touching the frame border are not faded.
float axis_weight(int i, int origin, int len, int extent, int overlap) {
  float w = 1.0f;
  const float ramp = static_cast<float>(overlap + 1);
  if (origin > 0) w = std::min(w, static_cast<float>(i + 1) / ramp);
  if (origin + len < extent) w = std::min(w, static_cast<float>(len - i) / ramp);
  return w;
}

Tensor crop(const Tensor& t, int x, int y, int w, int h) {
  Tensor out(t.channels(), h, w);
  for (int c = 0; c < t.channels(); ++c) out.channel(c) = t.channel(c).block(y, x, h, w);
  return out;
}

void put_plane(Tensor& t, int channel, const Plane& p, float inv_max) {
  t.channel(channel) = p.cast<float>().matrix() * inv_max;
}

Plane take_plane(const Tensor& t, int channel, float max_value) {
  const auto& src = t.channel(channel);
  Plane out(src.rows(), src.cols());
  for (Eigen::Index r = 0; r < src.rows(); ++r) {
    for (Eigen::Index c = 0; c < src.cols(); ++c) {
      float v = src(r, c) * max_value;
      // Also maps NaN to zero.
      if (!(v >= 0.0f)) v = 0.0f;
      v = std::min(v, max_value);
      out(r, c) = static_cast<std::uint16_t>(std::floor(v + 0.5f));
    }
  }
  return out;
}

}  // namespace

Tensor forward_tiled(const Model& model, const Tensor& aligned_input, const Tensor& center_baseline,
                     const TileOptions& tiles) {
  const int h = aligned_input.height();
  const int w = aligned_input.width();
  if (static_cast<long>(h) * w <= tiles.full_frame_max_pixels ||
      (h <= tiles.tile_size && w <= tiles.tile_size)) {
    return forward(model, aligned_input, center_baseline);
  }
  if (tiles.tile_size < 16 || tiles.overlap < 0 || tiles.overlap >= tiles.tile_size) {
    throw ParameterError("tiling: need tile_size >= 16 and 0 <= overlap < tile_size");
  }

  const int tile_w = std::min(tiles.tile_size, w);
  const int tile_h = std::min(tiles.tile_size, h);
  const int stride = tiles.tile_size - tiles.overlap;
  Tensor acc = Tensor::Zero(center_baseline.channels(), h, w);
  PlaneF weight = PlaneF::Zero(h, w);

  for (const int ty : tile_origins(h, tile_h, stride)) {
    for (const int tx : tile_origins(w, tile_w, stride)) {
      const Tensor out = forward(model, crop(aligned_input, tx, ty, tile_w, tile_h),
                                 crop(center_baseline, tx, ty, tile_w, tile_h));
      for (int y = 0; y < tile_h; ++y) {
        const float wy = axis_weight(y, ty, tile_h, h, tiles.overlap);
        for (int x = 0; x < tile_w; ++x) {
          const float wxy = wy * axis_weight(x, tx, tile_w, w, tiles.overlap);
          weight(ty + y, tx + x) += wxy;
          for (int c = 0; c < acc.channels(); ++c) acc(c, ty + y, tx + x) += wxy * out(c, y, x);
        }
      }
    }
  }
  for (int c = 0; c < acc.channels(); ++c) {
    acc.channel(c).array() /= weight;
  }
  return acc;
}

Frame enhance_frame(const Model& model, const Frame& prev, const Frame& cur, const Frame& next,
                    const EnhanceOptions& options) {
  if (!prev.format.same_layout(cur.format) || !next.format.same_layout(cur.format)) {
    throw ShapeError("enhance_frame: prev/cur/next formats differ");
  }
  if (model.config.input_frames != 3 || model.config.channels_per_frame != 3) {
    throw ModelIntegrityError("enhance_frame: model must take three 3-channel frames");
  }
  const BitDepthConfig bd = cur.format.bit_depth;
  const int shift = bd.shift();
  const auto max_value = static_cast<float>(bd.max_coded());

  const auto lift = [shift](const Frame& f) { return ebd_up_naive(yuv420_to_444(f), shift); };
  const Frame center = lift(cur);
  const auto aligned = [&](const Frame& neighbour) {
    if (&neighbour == &cur) return center;
    const Frame lifted = lift(neighbour);
    const FlowField flow = estimate_flow(lifted.y, center.y, options.flow, bd.cbd);
    return warp_frame(lifted, flow);
  };
  const Frame before = aligned(prev);
  const Frame after = aligned(next);

  const int h = cur.height();
  const int w = cur.width();
  const float inv_max = 1.0f / max_value;
  Tensor input(9, h, w);
  Tensor baseline(3, h, w);
  int channel = 0;
  for (const Frame* f : {&before, &center, &after}) {
    for (const Plane* p : {&f->y, &f->cb, &f->cr}) put_plane(input, channel++, *p, inv_max);
  }
  baseline.matrix() = input.matrix().middleRows(3, 3);

  const Tensor out = forward_tiled(model, input, baseline, options.tiles);

  Frame result;
  result.format = center.format;
  result.y = take_plane(out, 0, max_value);
  result.cb = take_plane(out, 1, max_value);
  result.cr = take_plane(out, 2, max_value);
  return cur.format.chroma == ChromaFormat::C420 ? yuv444_to_420(result) : result;
}

std::vector<Frame> enhance_sequence(const Model& model, std::span<const Frame> frames,
                                    const EnhanceOptions& options) {
  std::vector<Frame> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& prev = i > 0 ? frames[i - 1] : frames[i];
    const Frame& next = i + 1 < frames.size() ? frames[i + 1] : frames[i];
    out.push_back(enhance_frame(model, prev, frames[i], next, options));
  }
  return out;
}

}  // namespace ebda
