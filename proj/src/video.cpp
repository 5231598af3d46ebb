#include "ebda/video.hpp"

#include "ebda/errors.hpp"

#include <sstream>

namespace ebda {

void BitDepthConfig::validate() const {
  if (ebd < 1 || ebd > cbd || cbd > 16) {
    std::ostringstream msg;
    msg << "invalid bit depth: cbd=" << cbd << " ebd=" << ebd << " (need 1 <= ebd <= cbd <= 16)";
    throw ParameterError(msg.str());
  }
}

const char* to_string(ChromaFormat chroma) {
  return chroma == ChromaFormat::C420 ? "420" : "444";
}

ChromaFormat parse_chroma(const std::string& text) {
  if (text == "420" || text == "C420" || text == "4:2:0") return ChromaFormat::C420;
  if (text == "444" || text == "C444" || text == "4:4:4") return ChromaFormat::C444;
  throw ParameterError("unknown chroma format '" + text + "'");
}

std::uint64_t VideoFormat::samples_per_frame() const {
  const auto luma = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  const auto chroma_plane =
      static_cast<std::uint64_t>(chroma_width()) * static_cast<std::uint64_t>(chroma_height());
  return luma + 2 * chroma_plane;
}

void VideoFormat::validate() const {
  bit_depth.validate();
  if (width <= 0 || height <= 0) {
    throw ParameterError("video dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  if (chroma == ChromaFormat::C420 && (width % 2 != 0 || height % 2 != 0)) {
    throw ParameterError("4:2:0 video needs even dimensions, got " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  if (frame_count < 1) throw ParameterError("frame_count must be >= 1");
}

bool VideoFormat::same_layout(const VideoFormat& other) const {
  return width == other.width && height == other.height && chroma == other.chroma &&
         bit_depth == other.bit_depth;
}

Frame Frame::zeros(const VideoFormat& fmt) {
  Frame f;
  f.format = fmt;
  f.y = Plane::Zero(fmt.height, fmt.width);
  f.cb = Plane::Zero(fmt.chroma_height(), fmt.chroma_width());
  f.cr = Plane::Zero(fmt.chroma_height(), fmt.chroma_width());
  return f;
}

Plane& Frame::plane(PlaneSelector sel) {
  switch (sel) {
    case PlaneSelector::Y: return y;
    case PlaneSelector::Cb: return cb;
    case PlaneSelector::Cr: return cr;
  }
  return y;
}

const Plane& Frame::plane(PlaneSelector sel) const {
  return const_cast<Frame&>(*this).plane(sel);
}

void check_sample_range(const Frame& frame) {
  const auto& bd = frame.format.bit_depth;
  const auto limit = bd.reduced() ? bd.max_effective() : bd.max_coded();
  for (const Plane* p : {&frame.y, &frame.cb, &frame.cr}) {
    if (p->size() > 0 && static_cast<std::uint32_t>(p->maxCoeff()) > limit) {
      throw RangeError("sample value " + std::to_string(p->maxCoeff()) + " exceeds limit " +
                       std::to_string(limit));
    }
  }
}

YuvReader::YuvReader(const std::filesystem::path& path, const VideoFormat& format,
                     RangePolicy policy)
    : path_(path), format_(format), policy_(policy) {
  format_.validate();
  std::error_code ec;
  const auto size = std::filesystem::file_size(path_, ec);
  if (ec) throw IoError("cannot stat '" + path_.string() + "': " + ec.message());

  const auto frame_bytes = format_.bytes_per_frame();
  const auto expected = frame_bytes * static_cast<std::uint64_t>(format_.frame_count);
  if (size % frame_bytes != 0 || size < expected) {
    std::ostringstream msg;
    msg << "malformed raw YUV '" << path_.string() << "': expected " << expected << " bytes ("
        << format_.frame_count << " frames x " << frame_bytes << "), file has " << size;
    throw FormatError(msg.str());
  }
  in_.open(path_, std::ios::binary);
  if (!in_) throw IoError("cannot open '" + path_.string() + "'");
  buffer_.resize(frame_bytes);
}

std::optional<Frame> YuvReader::next() {
  if (frames_read_ >= format_.frame_count) return std::nullopt;
  in_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
  if (in_.gcount() != static_cast<std::streamsize>(buffer_.size())) {
    throw IoError("short read from '" + path_.string() + "' at frame " +
                  std::to_string(frames_read_));
  }

  Frame frame = Frame::zeros(format_);
  const int bytes = format_.bytes_per_sample();
  const std::uint32_t limit = format_.bit_depth.max_coded();
  std::size_t pos = 0;
  for (Plane* p : {&frame.y, &frame.cb, &frame.cr}) {
    std::uint16_t* dst = p->data();
    for (Eigen::Index i = 0; i < p->size(); ++i) {
      std::uint32_t v = buffer_[pos];
      if (bytes == 2) v |= static_cast<std::uint32_t>(buffer_[pos + 1]) << 8;
      pos += bytes;
      if (v > limit) {
        if (policy_ == RangePolicy::Strict) {
          throw RangeError("sample " + std::to_string(v) + " in frame " +
                           std::to_string(frames_read_) + " of '" + path_.string() +
                           "' exceeds " + std::to_string(limit));
        }
        v &= limit;
      }
      dst[i] = static_cast<std::uint16_t>(v);
    }
  }
  ++frames_read_;
  return frame;
}

YuvReader read_yuv(const std::filesystem::path& path, const VideoFormat& format,
                   RangePolicy policy) {
  return YuvReader(path, format, policy);
}

std::vector<Frame> read_yuv_all(const std::filesystem::path& path, const VideoFormat& format,
                                RangePolicy policy) {
  YuvReader reader(path, format, policy);
  std::vector<Frame> frames;
  frames.reserve(format.frame_count);
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  return frames;
}

std::uint64_t write_yuv(const std::filesystem::path& path, std::span<const Frame> frames) {
  if (frames.empty()) throw ParameterError("write_yuv: no frames to write to '" + path.string() + "'");
  const VideoFormat& fmt = frames.front().format;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!frames[i].format.same_layout(fmt)) {
      throw ShapeError("write_yuv: frame " + std::to_string(i) + " has a different format");
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");

  const int bytes = fmt.bytes_per_sample();
  std::vector<unsigned char> buffer(fmt.bytes_per_frame());
  std::uint64_t written = 0;
  for (const Frame& frame : frames) {
    std::size_t pos = 0;
    for (const Plane* p : {&frame.y, &frame.cb, &frame.cr}) {
      const std::uint16_t* src = p->data();
      for (Eigen::Index i = 0; i < p->size(); ++i) {
        buffer[pos++] = static_cast<unsigned char>(src[i] & 0xff);
        if (bytes == 2) buffer[pos++] = static_cast<unsigned char>(src[i] >> 8);
      }
    }
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(pos));
    if (!out) throw IoError("write failed on '" + path.string() + "'");
    written += pos;
  }
  return written;
}

Plane extract_block(const Frame& frame, PlaneSelector sel, int x, int y, int w, int h) {
  const Plane& p = frame.plane(sel);
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > p.cols() || y + h > p.rows()) {
    std::ostringstream msg;
    msg << "block (" << x << "," << y << " " << w << "x" << h << ") outside plane " << p.cols()
        << "x" << p.rows();
    throw BoundsError(msg.str());
  }
  return p.block(y, x, h, w);
}

}  // namespace ebda
