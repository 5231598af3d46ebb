#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ebda {

// Row-major 2-D sample array. Rows are picture lines, columns are samples.
template <typename Scalar>
using PlaneOf = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Plane = PlaneOf<std::uint16_t>;
using PlaneF = PlaneOf<float>;

// Coding bit depth (the container/codec depth) and the effective bit depth
// the sample values actually occupy.
struct BitDepthConfig {
  int cbd = 10;
  int ebd = 10;

  int shift() const { return cbd - ebd; }
  bool reduced() const { return ebd < cbd; }
  std::uint32_t max_coded() const { return (1u << cbd) - 1u; }
  std::uint32_t max_effective() const { return (1u << ebd) - 1u; }

  // Throws ParameterError unless 1 <= ebd <= cbd <= 16.
  void validate() const;

  friend bool operator==(const BitDepthConfig&, const BitDepthConfig&) = default;
};

enum class ChromaFormat { C420, C444 };

const char* to_string(ChromaFormat chroma);
ChromaFormat parse_chroma(const std::string& text);

struct VideoFormat {
  int width = 0;
  int height = 0;
  ChromaFormat chroma = ChromaFormat::C420;
  BitDepthConfig bit_depth;
  int frame_count = 1;
  double frame_rate = 30.0;

  int chroma_width() const { return chroma == ChromaFormat::C420 ? width / 2 : width; }
  int chroma_height() const { return chroma == ChromaFormat::C420 ? height / 2 : height; }
  int bytes_per_sample() const { return bit_depth.cbd <= 8 ? 1 : 2; }
  std::uint64_t samples_per_frame() const;
  std::uint64_t bytes_per_frame() const { return samples_per_frame() * bytes_per_sample(); }

  void validate() const;

  // Same picture geometry and bit depths; frame count and rate are ignored.
  bool same_layout(const VideoFormat& other) const;
};

enum class PlaneSelector { Y, Cb, Cr };

struct Frame {
  VideoFormat format;
  Plane y;
  Plane cb;
  Plane cr;

  // Zero-filled frame with plane dimensions implied by `fmt`.
  static Frame zeros(const VideoFormat& fmt);

  Plane& plane(PlaneSelector sel);
  const Plane& plane(PlaneSelector sel) const;

  int width() const { return format.width; }
  int height() const { return format.height; }
};

// Throws RangeError if any sample exceeds the limit implied by the frame's
// tag: 2^ebd - 1 for reduced frames, else 2^cbd - 1.
void check_sample_range(const Frame& frame);

enum class RangePolicy {
  Strict,  // out-of-range samples raise RangeError
  Mask,    // out-of-range samples are masked to cbd bits
};

// Sequential reader over a headerless planar YUV file.
class YuvReader {
 public:
  YuvReader(const std::filesystem::path& path, const VideoFormat& format,
            RangePolicy policy = RangePolicy::Strict);

  // Next frame, or nullopt once format.frame_count frames have been produced.
  std::optional<Frame> next();

  const VideoFormat& format() const { return format_; }
  int frames_read() const { return frames_read_; }

 private:
  std::filesystem::path path_;
  VideoFormat format_;
  RangePolicy policy_;
  std::ifstream in_;
  std::vector<unsigned char> buffer_;
  int frames_read_ = 0;
};

YuvReader read_yuv(const std::filesystem::path& path, const VideoFormat& format,
                   RangePolicy policy = RangePolicy::Strict);

// Reads every frame of the file into memory.
std::vector<Frame> read_yuv_all(const std::filesystem::path& path, const VideoFormat& format,
                                RangePolicy policy = RangePolicy::Strict);

// Writes frames as planar Y, Cb, Cr. Returns the number of bytes written.
std::uint64_t write_yuv(const std::filesystem::path& path, std::span<const Frame> frames);

// Copy of the w x h window at (x, y) of the selected plane.
Plane extract_block(const Frame& frame, PlaneSelector sel, int x, int y, int w, int h);

}  // namespace ebda
