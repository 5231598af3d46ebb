#include "ebda/codec.hpp"

#include "ebda/binary_io.hpp"
#include "ebda/errors.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ebda {
namespace {

constexpr char kMockMagic[4] = {'E', 'B', 'M', 'C'};
constexpr std::uint32_t kMockVersion = 1;

std::filesystem::path fresh_run_dir(const std::filesystem::path& workdir, const std::string& tag) {
  static std::atomic<std::uint64_t> counter{0};
  const auto n = counter.fetch_add(1);
  auto dir = workdir / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(n));
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::map<std::string, std::string> placeholder_values(const VideoFormat& fmt, int frames) {
  std::ostringstream fps;
  fps << fmt.frame_rate;
  return {{"width", std::to_string(fmt.width)},
          {"height", std::to_string(fmt.height)},
          {"frames", std::to_string(frames)},
          {"fps", fps.str()}};
}

void require_placeholders(const std::string& tmpl, const char* which,
                          std::initializer_list<const char*> keys) {
  if (tmpl.empty()) throw ConfigError(std::string(which) + " template is empty");
  for (const char* key : keys) {
    if (tmpl.find(std::string("{") + key + "}") == std::string::npos) {
      throw ConfigError(std::string(which) + " template is missing {" + key + "}: " + tmpl);
    }
  }
}

std::vector<std::string> expand_command(const std::string& tmpl,
                                        const std::map<std::string, std::string>& values) {
  auto words = split_command(tmpl);
  for (auto& w : words) w = expand_placeholders(w, values);
  return words;
}

void check_frames(std::span<const Frame> frames) {
  if (frames.empty()) throw ParameterError("codec: no frames");
  for (const auto& f : frames) {
    if (!f.format.same_layout(frames.front().format)) {
      throw ShapeError("codec: frames do not share one format");
    }
  }
}

inline std::uint32_t round_half_away(double v) {
  return static_cast<std::uint32_t>(std::floor(v + 0.5));
}

}  // namespace

void CodecConfig::validate() const {
  if (kind == CodecKind::Mock) return;
  require_placeholders(encode_template, "encode", {"input", "output", "qp"});
  require_placeholders(decode_template, "decode", {"input", "output"});
}

double bitrate_kbps(std::uint64_t total_bits, double fps, int frame_count) {
  if (frame_count < 1) throw ParameterError("bitrate: frame_count must be >= 1");
  return static_cast<double>(total_bits) * fps / static_cast<double>(frame_count) / 1000.0;
}

EncodeResult encode_external(const CodecConfig& cfg, std::span<const Frame> frames, int qp_base) {
  require_placeholders(cfg.encode_template, "encode", {"input", "output", "qp"});
  check_frames(frames);
  const VideoFormat& fmt = frames.front().format;
  const int qp = effective_qp(qp_base, cfg.qp_offset);
  const int count = static_cast<int>(frames.size());

  const auto dir = fresh_run_dir(cfg.workdir, "enc-qp" + std::to_string(qp));
  const auto input = dir / "input.yuv";
  const auto output = dir / "bitstream.bin";
  write_yuv(input, frames);

  auto values = placeholder_values(fmt, count);
  values["input"] = input.string();
  values["output"] = output.string();
  values["qp"] = std::to_string(qp);
  const auto argv = expand_command(cfg.encode_template, values);

  const auto result = run_process(argv, dir / "encode.log");
  if (result.exit_code != 0) {
    throw ProcessError("encoder exited with status " + std::to_string(result.exit_code) +
                       "; output:\n" + result.output);
  }
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(output, ec);
  if (ec) throw ProcessError("encoder produced no bitstream at '" + output.string() + "'");
  if (bytes == 0) throw ProcessError("encoder produced an empty bitstream at '" + output.string() + "'");

  EncodeResult r;
  r.bitstream_path = output;
  r.total_bits = bytes * 8;
  r.bitrate_kbps = bitrate_kbps(r.total_bits, fmt.frame_rate, count);
  r.effective_qp = qp;
  r.frame_count = count;
  return r;
}

std::vector<Frame> decode_external(const CodecConfig& cfg, const std::filesystem::path& bitstream,
                                   const VideoFormat& format) {
  require_placeholders(cfg.decode_template, "decode", {"input", "output"});
  if (!std::filesystem::exists(bitstream)) {
    throw IoError("bitstream '" + bitstream.string() + "' does not exist");
  }
  const auto dir = fresh_run_dir(cfg.workdir, "dec");
  const auto output = dir / "decoded.yuv";

  auto values = placeholder_values(format, format.frame_count);
  values["input"] = bitstream.string();
  values["output"] = output.string();
  values["qp"] = "";
  const auto result = run_process(expand_command(cfg.decode_template, values), dir / "decode.log");
  if (result.exit_code != 0) {
    throw ProcessError("decoder exited with status " + std::to_string(result.exit_code) +
                       "; output:\n" + result.output);
  }
  if (!std::filesystem::exists(output)) {
    throw ProcessError("decoder produced no output at '" + output.string() + "'");
  }
  return read_yuv_all(output, format);
}

double mock_step(int qp) { return std::exp2((qp - 4) / 6.0); }

MockResult mock_codec(std::span<const Frame> frames, int qp) {
  if (qp < 0 || qp > 63) throw ParameterError("mock codec: qp " + std::to_string(qp) + " outside [0, 63]");
  check_frames(frames);
  const double step = mock_step(qp);
  const std::uint32_t max_value = frames.front().format.bit_depth.max_coded();

  MockResult result;
  result.reconstruction.reserve(frames.size());
  double bits = 0.0;
  for (const Frame& f : frames) {
    Frame rec = f;
    for (const auto sel : {PlaneSelector::Y, PlaneSelector::Cb, PlaneSelector::Cr}) {
      const Plane& src = f.plane(sel);
      Plane& dst = rec.plane(sel);
      std::map<std::uint32_t, std::uint64_t> histogram;
      for (Eigen::Index i = 0; i < src.size(); ++i) {
        const std::uint32_t index = round_half_away(src.data()[i] / step);
        ++histogram[index];
        dst.data()[i] = static_cast<std::uint16_t>(std::min(max_value, round_half_away(index * step)));
      }
      const auto n = static_cast<double>(src.size());
      for (const auto& [index, count] : histogram) {
        const double p = static_cast<double>(count) / n;
        bits -= static_cast<double>(count) * std::log2(p);
      }
    }
    result.reconstruction.push_back(std::move(rec));
  }
  result.total_bits = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(bits)));
  return result;
}

void write_mock_bitstream(const std::filesystem::path& path, std::span<const Frame> frames, int qp) {
  if (qp < 0 || qp > 63) throw ParameterError("mock codec: qp " + std::to_string(qp) + " outside [0, 63]");
  check_frames(frames);
  const VideoFormat& fmt = frames.front().format;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  BinaryWriter w(out);
  w.bytes(kMockMagic, 4);
  w.u32(kMockVersion);
  w.u32(static_cast<std::uint32_t>(fmt.width));
  w.u32(static_cast<std::uint32_t>(fmt.height));
  w.u8(fmt.chroma == ChromaFormat::C420 ? 0 : 1);
  w.u8(static_cast<std::uint8_t>(fmt.bit_depth.cbd));
  w.u8(static_cast<std::uint8_t>(fmt.bit_depth.ebd));
  w.u32(static_cast<std::uint32_t>(frames.size()));
  w.u32(static_cast<std::uint32_t>(qp));
  w.u64(std::bit_cast<std::uint64_t>(fmt.frame_rate));
  const double step = mock_step(qp);
  for (const Frame& f : frames) {
    for (const Plane* p : {&f.y, &f.cb, &f.cr}) {
      for (Eigen::Index i = 0; i < p->size(); ++i) w.u32(round_half_away(p->data()[i] / step));
    }
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

std::vector<Frame> read_mock_bitstream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bitstream '" + path.string() + "'");
  BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMockMagic)) throw FormatError("'" + path.string() + "' is not a mock bitstream");
  if (r.u32() != kMockVersion) throw FormatError("'" + path.string() + "': unsupported mock bitstream version");
  VideoFormat fmt;
  fmt.width = static_cast<int>(r.u32());
  fmt.height = static_cast<int>(r.u32());
  fmt.chroma = r.u8() == 0 ? ChromaFormat::C420 : ChromaFormat::C444;
  fmt.bit_depth.cbd = r.u8();
  fmt.bit_depth.ebd = r.u8();
  fmt.frame_count = static_cast<int>(r.u32());
  const int qp = static_cast<int>(r.u32());
  fmt.frame_rate = std::bit_cast<double>(r.u64());
  try {
    fmt.validate();
  } catch (const ParameterError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  if (qp > 63) throw FormatError("'" + path.string() + "': qp out of range");

  const double step = mock_step(qp);
  const std::uint32_t max_value = fmt.bit_depth.max_coded();
  std::vector<Frame> frames;
  for (int n = 0; n < fmt.frame_count; ++n) {
    Frame f = Frame::zeros(fmt);
    for (Plane* p : {&f.y, &f.cb, &f.cr}) {
      for (Eigen::Index i = 0; i < p->size(); ++i) {
        p->data()[i] = static_cast<std::uint16_t>(std::min(max_value, round_half_away(r.u32() * step)));
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

CodingResult encode_decode(const CodecConfig& cfg, std::span<const Frame> frames, int qp_base,
                           bool apply_offset) {
  check_frames(frames);
  CodecConfig run_cfg = cfg;
  if (!apply_offset) run_cfg.qp_offset = 0;
  const VideoFormat& fmt = frames.front().format;
  const int count = static_cast<int>(frames.size());

  CodingResult result;
  if (cfg.kind == CodecKind::Mock) {
    result.effective_qp = effective_qp(qp_base, run_cfg.qp_offset);
    MockResult mock = mock_codec(frames, result.effective_qp);
    result.reconstruction = std::move(mock.reconstruction);
    result.total_bits = mock.total_bits;
  } else {
    run_cfg.validate();
    const EncodeResult enc = encode_external(run_cfg, frames, qp_base);
    VideoFormat decoded_fmt = fmt;
    decoded_fmt.frame_count = count;
    result.reconstruction = decode_external(run_cfg, enc.bitstream_path, decoded_fmt);
    result.total_bits = enc.total_bits;
    result.effective_qp = enc.effective_qp;
  }
  result.bitrate_kbps = bitrate_kbps(result.total_bits, fmt.frame_rate, count);
  for (auto& f : result.reconstruction) f.format = fmt;
  return result;
}

}  // namespace ebda
