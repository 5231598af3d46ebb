#include "ebda/chroma.hpp"

#include "ebda/errors.hpp"

#include <string>

namespace ebda {

Plane upsample_chroma_2x(const Plane& plane) {
  Plane out(plane.rows() * 2, plane.cols() * 2);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = plane(r / 2, c / 2);
  }
  return out;
}

Plane downsample_chroma_2x(const Plane& plane) {
  if (plane.rows() % 2 != 0 || plane.cols() % 2 != 0) {
    throw ShapeError("2x2 chroma downsampling needs even plane dimensions, got " +
                     std::to_string(plane.cols()) + "x" + std::to_string(plane.rows()));
  }
  Plane out(plane.rows() / 2, plane.cols() / 2);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const std::uint32_t sum = std::uint32_t{plane(2 * r, 2 * c)} + plane(2 * r, 2 * c + 1) +
                                plane(2 * r + 1, 2 * c) + plane(2 * r + 1, 2 * c + 1);
      out(r, c) = static_cast<std::uint16_t>((sum + 2) / 4);
    }
  }
  return out;
}

Frame yuv420_to_444(const Frame& frame, bool* already_444) {
  if (already_444) *already_444 = frame.format.chroma == ChromaFormat::C444;
  if (frame.format.chroma == ChromaFormat::C444) return frame;
  Frame out;
  out.format = frame.format;
  out.format.chroma = ChromaFormat::C444;
  out.y = frame.y;
  out.cb = upsample_chroma_2x(frame.cb);
  out.cr = upsample_chroma_2x(frame.cr);
  return out;
}

Frame yuv444_to_420(const Frame& frame) {
  if (frame.format.chroma != ChromaFormat::C444) {
    throw ParameterError("yuv444_to_420: input is not 4:4:4");
  }
  if (frame.width() % 2 != 0 || frame.height() % 2 != 0) {
    throw ShapeError("yuv444_to_420: odd dimensions " + std::to_string(frame.width()) + "x" +
                     std::to_string(frame.height()));
  }
  Frame out;
  out.format = frame.format;
  out.format.chroma = ChromaFormat::C420;
  out.y = frame.y;
  out.cb = downsample_chroma_2x(frame.cb);
  out.cr = downsample_chroma_2x(frame.cr);
  return out;
}

}  // namespace ebda
