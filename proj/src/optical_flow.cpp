#include "ebda/optical_flow.hpp"

#include "ebda/binary_io.hpp"
#include "ebda/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace ebda {
namespace {

// Added to the diagonal of every patch Hessian. Textureless patches keep
// their initial flow instead of dividing by zero.
constexpr float kHessianRegularizer = 1e-2f;

inline float sample_bilinear(const PlaneF& p, float x, float y) {
  const float max_x = static_cast<float>(p.cols() - 1);
  const float max_y = static_cast<float>(p.rows() - 1);
  x = std::clamp(x, 0.0f, max_x);
  y = std::clamp(y, 0.0f, max_y);
  const auto x0 = static_cast<Eigen::Index>(std::floor(x));
  const auto y0 = static_cast<Eigen::Index>(std::floor(y));
  const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, p.cols() - 1);
  const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, p.rows() - 1);
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float top = p(y0, x0) + fx * (p(y0, x1) - p(y0, x0));
  const float bottom = p(y1, x0) + fx * (p(y1, x1) - p(y1, x0));
  return top + fy * (bottom - top);
}

// Bilinear resize with pixel-centre alignment. At a factor of exactly one
// half this is the 2x2 box average.
PlaneF resize_bilinear(const PlaneF& src, Eigen::Index rows, Eigen::Index cols) {
  PlaneF dst(rows, cols);
  const float sx = static_cast<float>(src.cols()) / static_cast<float>(cols);
  const float sy = static_cast<float>(src.rows()) / static_cast<float>(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const float y = (static_cast<float>(r) + 0.5f) * sy - 0.5f;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const float x = (static_cast<float>(c) + 0.5f) * sx - 0.5f;
      dst(r, c) = sample_bilinear(src, x, y);
    }
  }
  return dst;
}

struct Gradients {
  PlaneF gx;
  PlaneF gy;
};

Gradients central_gradients(const PlaneF& p) {
  const Eigen::Index rows = p.rows();
  const Eigen::Index cols = p.cols();
  Gradients g{PlaneF::Zero(rows, cols), PlaneF::Zero(rows, cols)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index cl = std::max<Eigen::Index>(c - 1, 0);
      const Eigen::Index cr = std::min<Eigen::Index>(c + 1, cols - 1);
      const Eigen::Index ru = std::max<Eigen::Index>(r - 1, 0);
      const Eigen::Index rd = std::min<Eigen::Index>(r + 1, rows - 1);
      g.gx(r, c) = cr > cl ? (p(r, cr) - p(r, cl)) / static_cast<float>(cr - cl) : 0.0f;
      g.gy(r, c) = rd > ru ? (p(rd, c) - p(ru, c)) / static_cast<float>(rd - ru) : 0.0f;
    }
  }
  return g;
}

// Patch origins along one axis: every `stride` samples, with the last patch
// flush against the far edge so every sample is covered.
std::vector<Eigen::Index> patch_origins(Eigen::Index extent, Eigen::Index patch, Eigen::Index stride) {
  std::vector<Eigen::Index> origins;
  for (Eigen::Index o = 0; o + patch <= extent; o += stride) origins.push_back(o);
  if (origins.empty() || origins.back() + patch < extent) origins.push_back(extent - patch);
  return origins;
}

// One pyramid level: sparse patch search followed by densification.
void refine_level(const PlaneF& reference, const PlaneF& target, const FlowParams& params,
                  FlowField& flow) {
  const Eigen::Index rows = target.rows();
  const Eigen::Index cols = target.cols();
  const Eigen::Index psz = std::min<Eigen::Index>({params.patch_size, rows, cols});
  const Eigen::Index stride = std::clamp<Eigen::Index>(params.patch_stride, 1, psz);
  const Gradients grad = central_gradients(target);

  const auto xs = patch_origins(cols, psz, stride);
  const auto ys = patch_origins(rows, psz, stride);

  PlaneF sum_w = PlaneF::Zero(rows, cols);
  PlaneF sum_u = PlaneF::Zero(rows, cols);
  PlaneF sum_v = PlaneF::Zero(rows, cols);

  for (const Eigen::Index oy : ys) {
    for (const Eigen::Index ox : xs) {
      const Eigen::Index cy = oy + psz / 2 - (psz % 2 == 0 ? 1 : 0);
      const Eigen::Index cx = ox + psz / 2 - (psz % 2 == 0 ? 1 : 0);
      const Eigen::Vector2f init(flow.u(cy, cx), flow.v(cy, cx));

      Eigen::Matrix2f hessian = Eigen::Matrix2f::Identity() * kHessianRegularizer;
      for (Eigen::Index r = oy; r < oy + psz; ++r) {
        for (Eigen::Index c = ox; c < ox + psz; ++c) {
          const float gx = grad.gx(r, c);
          const float gy = grad.gy(r, c);
          hessian(0, 0) += gx * gx;
          hessian(0, 1) += gx * gy;
          hessian(1, 1) += gy * gy;
        }
      }
      hessian(1, 0) = hessian(0, 1);
      const Eigen::Matrix2f inv_hessian = hessian.inverse();

      Eigen::Vector2f cur = init;
      Eigen::Vector2f best = init;
      float best_ssd = std::numeric_limits<float>::infinity();
      for (int it = 0; it < params.iterations_per_patch; ++it) {
        Eigen::Vector2f b = Eigen::Vector2f::Zero();
        float ssd = 0.0f;
        for (Eigen::Index r = oy; r < oy + psz; ++r) {
          for (Eigen::Index c = ox; c < ox + psz; ++c) {
            const float e = sample_bilinear(reference, static_cast<float>(c) + cur.x(),
                                            static_cast<float>(r) + cur.y()) -
                            target(r, c);
            b.x() += grad.gx(r, c) * e;
            b.y() += grad.gy(r, c) * e;
            ssd += e * e;
          }
        }
        if (ssd >= best_ssd) break;
        best_ssd = ssd;
        best = cur;
        cur -= inv_hessian * b;
      }
      if ((best - init).norm() > static_cast<float>(psz)) best = init;

      for (Eigen::Index r = oy; r < oy + psz; ++r) {
        for (Eigen::Index c = ox; c < ox + psz; ++c) {
          const float diff = sample_bilinear(reference, static_cast<float>(c) + best.x(),
                                             static_cast<float>(r) + best.y()) -
                             target(r, c);
          const float w = 1.0f / std::max(1.0f, std::abs(diff));
          sum_w(r, c) += w;
          sum_u(r, c) += w * best.x();
          sum_v(r, c) += w * best.y();
        }
      }
    }
  }
  flow.u = sum_u / sum_w;
  flow.v = sum_v / sum_w;
}

}  // namespace

FlowField FlowField::zeros(int width, int height) {
  return FlowField{PlaneF::Zero(height, width), PlaneF::Zero(height, width)};
}

void FlowParams::validate() const {
  if (pyramid_levels < 1) throw ParameterError("flow: pyramid_levels must be >= 1");
  if (patch_size < 4) throw ParameterError("flow: patch_size must be >= 4");
  if (patch_stride < 1 || patch_stride > patch_size) {
    throw ParameterError("flow: patch_stride must be in [1, patch_size]");
  }
  if (iterations_per_patch < 1) throw ParameterError("flow: iterations_per_patch must be >= 1");
  if (!(downscale_factor > 0.0 && downscale_factor < 1.0)) {
    throw ParameterError("flow: downscale_factor must be in (0, 1)");
  }
}

FlowField estimate_flow(const PlaneF& reference, const PlaneF& target, const FlowParams& params) {
  params.validate();
  if (reference.rows() != target.rows() || reference.cols() != target.cols()) {
    throw ShapeError("flow: reference is " + std::to_string(reference.cols()) + "x" +
                     std::to_string(reference.rows()) + ", target is " +
                     std::to_string(target.cols()) + "x" + std::to_string(target.rows()));
  }
  const Eigen::Index min_extent = Eigen::Index{1} << (params.pyramid_levels - 1);
  if (target.rows() < min_extent || target.cols() < min_extent) {
    throw ParameterError("flow: plane " + std::to_string(target.cols()) + "x" +
                         std::to_string(target.rows()) + " too small for " +
                         std::to_string(params.pyramid_levels) + " pyramid levels");
  }

  std::vector<PlaneF> ref_pyr{reference};
  std::vector<PlaneF> tgt_pyr{target};
  for (int level = 1; level < params.pyramid_levels; ++level) {
    const double scale = std::pow(params.downscale_factor, level);
    const auto rows = std::max<Eigen::Index>(1, std::lround(target.rows() * scale));
    const auto cols = std::max<Eigen::Index>(1, std::lround(target.cols() * scale));
    ref_pyr.push_back(resize_bilinear(ref_pyr.back(), rows, cols));
    tgt_pyr.push_back(resize_bilinear(tgt_pyr.back(), rows, cols));
  }

  const int coarsest = params.pyramid_levels - 1;
  FlowField flow = FlowField::zeros(static_cast<int>(tgt_pyr[coarsest].cols()),
                                    static_cast<int>(tgt_pyr[coarsest].rows()));
  for (int level = coarsest; level >= 0; --level) {
    const PlaneF& tgt = tgt_pyr[level];
    if (level != coarsest) {
      const float ux = static_cast<float>(tgt.cols()) / static_cast<float>(flow.width());
      const float vy = static_cast<float>(tgt.rows()) / static_cast<float>(flow.height());
      flow.u = resize_bilinear(flow.u, tgt.rows(), tgt.cols()) * ux;
      flow.v = resize_bilinear(flow.v, tgt.rows(), tgt.cols()) * vy;
    }
    refine_level(ref_pyr[level], tgt, params, flow);
  }
  return flow;
}

FlowField estimate_flow(const Plane& reference_luma, const Plane& target_luma,
                        const FlowParams& params, int bit_depth) {
  if (bit_depth < 1 || bit_depth > 16) throw ParameterError("flow: bit depth out of range");
  const float scale = 255.0f / static_cast<float>((1u << bit_depth) - 1u);
  return estimate_flow(PlaneF(reference_luma.cast<float>() * scale),
                       PlaneF(target_luma.cast<float>() * scale), params);
}

PlaneF warp_plane(const PlaneF& plane, const PlaneF& u, const PlaneF& v) {
  if (u.rows() != plane.rows() || u.cols() != plane.cols() || v.rows() != plane.rows() ||
      v.cols() != plane.cols()) {
    throw ShapeError("warp: flow " + std::to_string(u.cols()) + "x" + std::to_string(u.rows()) +
                     " does not match plane " + std::to_string(plane.cols()) + "x" +
                     std::to_string(plane.rows()));
  }
  PlaneF out(plane.rows(), plane.cols());
  for (Eigen::Index r = 0; r < plane.rows(); ++r) {
    for (Eigen::Index c = 0; c < plane.cols(); ++c) {
      out(r, c) = sample_bilinear(plane, static_cast<float>(c) + u(r, c),
                                  static_cast<float>(r) + v(r, c));
    }
  }
  return out;
}

Plane warp_plane(const Plane& plane, const PlaneF& u, const PlaneF& v) {
  const PlaneF warped = warp_plane(PlaneF(plane.cast<float>()), u, v);
  // Samples are non-negative, so adding one half and truncating rounds half
  // away from zero.
  return (warped + 0.5f).floor().cast<std::uint16_t>();
}

Frame warp_frame(const Frame& frame, const FlowField& flow) {
  if (flow.width() != frame.width() || flow.height() != frame.height()) {
    throw ShapeError("warp_frame: flow " + std::to_string(flow.width()) + "x" +
                     std::to_string(flow.height()) + " does not match frame " +
                     std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
  }
  Frame out;
  out.format = frame.format;
  out.y = warp_plane(frame.y, flow.u, flow.v);
  if (frame.format.chroma == ChromaFormat::C444) {
    out.cb = warp_plane(frame.cb, flow.u, flow.v);
    out.cr = warp_plane(frame.cr, flow.u, flow.v);
    return out;
  }
  const Eigen::Index rows = frame.cb.rows();
  const Eigen::Index cols = frame.cb.cols();
  PlaneF cu(rows, cols);
  PlaneF cv(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      cu(r, c) = 0.125f * flow.u.block(2 * r, 2 * c, 2, 2).sum();
      cv(r, c) = 0.125f * flow.v.block(2 * r, 2 * c, 2, 2).sum();
    }
  }
  out.cb = warp_plane(frame.cb, cu, cv);
  out.cr = warp_plane(frame.cr, cu, cv);
  return out;
}

void write_flow(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  BinaryWriter w(out);
  w.u32(static_cast<std::uint32_t>(flow.width()));
  w.u32(static_cast<std::uint32_t>(flow.height()));
  for (Eigen::Index r = 0; r < flow.u.rows(); ++r) {
    for (Eigen::Index c = 0; c < flow.u.cols(); ++c) {
      w.f32(flow.u(r, c));
      w.f32(flow.v(r, c));
    }
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

FlowField read_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  BinaryReader rd(in, path.string());
  const auto width = rd.u32();
  const auto height = rd.u32();
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
    throw FormatError("flow file '" + path.string() + "' has implausible dimensions");
  }
  FlowField flow = FlowField::zeros(static_cast<int>(width), static_cast<int>(height));
  for (Eigen::Index r = 0; r < flow.u.rows(); ++r) {
    for (Eigen::Index c = 0; c < flow.u.cols(); ++c) {
      flow.u(r, c) = rd.f32();
      flow.v(r, c) = rd.f32();
    }
  }
  return flow;
}

}  // namespace ebda
