#pragma once

#include "ebda/video.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ebda {

enum class CodecKind { Mock, External };

// Encoder/decoder command templates. Recognised placeholders: {input}
// {output} {qp} {width} {height} {frames} {fps}. Templates are split on
// whitespace (single or double quotes group words) and run directly, not
// through a shell.
struct CodecConfig {
  CodecKind kind = CodecKind::Mock;
  std::string name = "mock";
  std::string encode_template;
  std::string decode_template;
  int qp_offset = -6;
  std::filesystem::path workdir = "work";

  // Throws ConfigError if an external template lacks a required placeholder.
  void validate() const;
};

// The only place the QP offset is applied.
constexpr int effective_qp(int qp_base, int qp_offset) { return qp_base + qp_offset; }

// kbps = total_bits * fps / frame_count / 1000
double bitrate_kbps(std::uint64_t total_bits, double fps, int frame_count);

struct EncodeResult {
  std::filesystem::path bitstream_path;
  std::uint64_t total_bits = 0;
  double bitrate_kbps = 0.0;
  int effective_qp = 0;
  int frame_count = 0;
};

// Writes `frames` as raw YUV into a fresh run directory under cfg.workdir and
// runs the encoder at effective_qp(qp_base, cfg.qp_offset). Stats come from
// the bitstream size. Encoder stdout/stderr go to encode.log in the run dir.
EncodeResult encode_external(const CodecConfig& cfg, std::span<const Frame> frames, int qp_base);

// Runs the decoder on `bitstream` and reads back `format.frame_count` frames.
std::vector<Frame> decode_external(const CodecConfig& cfg, const std::filesystem::path& bitstream,
                                   const VideoFormat& format);

struct MockResult {
  std::vector<Frame> reconstruction;
  std::uint64_t total_bits = 0;
};

// Uniform scalar quantiser with step 2^((qp - 4) / 6). total_bits is the
// zero-order entropy of the quantisation indices, summed over planes and
// frames, rounded up.
MockResult mock_codec(std::span<const Frame> frames, int qp);

// Quantisation step used by the mock codec.
double mock_step(int qp);

// Mock bitstream: magic "EBMC", u32 version, u32 width, u32 height,
// u8 chroma (0 = 420, 1 = 444), u8 cbd, u8 ebd, u32 frames, u32 qp, f64 fps,
// then u32 quantisation indices plane by plane. Lets the mock stand in for
// an external executable.
void write_mock_bitstream(const std::filesystem::path& path, std::span<const Frame> frames, int qp);
std::vector<Frame> read_mock_bitstream(const std::filesystem::path& path);

// Result of one encode + decode round trip at a base QP.
struct CodingResult {
  std::vector<Frame> reconstruction;
  std::uint64_t total_bits = 0;
  double bitrate_kbps = 0.0;
  int effective_qp = 0;
};

// Encode and decode through the configured codec. The QP offset is applied
// only when `apply_offset` is set (EBDA runs); anchors run at qp_base.
CodingResult encode_decode(const CodecConfig& cfg, std::span<const Frame> frames, int qp_base,
                           bool apply_offset);

// Subprocess plumbing.
std::vector<std::string> split_command(const std::string& command);
std::string expand_placeholders(const std::string& text,
                                const std::map<std::string, std::string>& values);

struct ProcessResult {
  int exit_code = 0;
  std::string output;  // combined stdout/stderr, as written to the log
};

// Spawns argv[0] (searched on PATH) with stdout/stderr appended to `log_path`.
// Throws SpawnError when the executable cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& log_path);

}  // namespace ebda
