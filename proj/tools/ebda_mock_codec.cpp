// Stand-alone wrapper around the built-in mock codec, so the external-codec
// route can be exercised without a real encoder.
//
//   ebda_mock_codec encode -i in.yuv -o out.bin --qp 27 --width 96 --height 96
//   ebda_mock_codec decode -i out.bin -o rec.yuv

#include "ebda/codec.hpp"
#include "ebda/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  using namespace ebda;
  CLI::App app{"Mock scalar-quantiser codec"};
  app.require_subcommand(1);

  auto* enc = app.add_subcommand("encode", "Quantise a raw YUV file into a mock bitstream");
  std::string enc_in, enc_out, chroma = "420";
  int qp = 0, width = 0, height = 0, cbd = 10, frames = 0;
  double fps = 30.0;
  std::optional<int> fail_above;
  enc->add_option("-i,--input", enc_in)->required();
  enc->add_option("-o,--output", enc_out)->required();
  enc->add_option("--qp", qp)->required();
  enc->add_option("--width", width)->required();
  enc->add_option("--height", height)->required();
  enc->add_option("--chroma", chroma)->capture_default_str();
  enc->add_option("--cbd", cbd)->capture_default_str();
  enc->add_option("--frames", frames, "Frame count (default: whole file)");
  enc->add_option("--fps", fps)->capture_default_str();
  enc->add_option("--fail-above-qp", fail_above, "Exit with status 3 when qp exceeds this (testing)");

  auto* dec = app.add_subcommand("decode", "Reconstruct raw YUV from a mock bitstream");
  std::string dec_in, dec_out;
  dec->add_option("-i,--input", dec_in)->required();
  dec->add_option("-o,--output", dec_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*enc) {
      if (fail_above && qp > *fail_above) {
        std::cerr << "mock encoder: refusing qp " << qp << '\n';
        return 3;
      }
      VideoFormat fmt;
      fmt.width = width;
      fmt.height = height;
      fmt.chroma = parse_chroma(chroma);
      fmt.bit_depth = {cbd, cbd};
      fmt.frame_rate = fps;
      fmt.validate();
      if (frames > 0) {
        fmt.frame_count = frames;
      } else {
        const auto size = std::filesystem::file_size(enc_in);
        fmt.frame_count = static_cast<int>(std::max<std::uintmax_t>(1, size / fmt.bytes_per_frame()));
      }
      const auto input = read_yuv_all(enc_in, fmt);
      write_mock_bitstream(enc_out, input, qp);
      std::cout << "encoded " << input.size() << " frames at qp " << qp << '\n';
    } else {
      const auto output = read_mock_bitstream(dec_in);
      write_yuv(dec_out, output);
      std::cout << "decoded " << output.size() << " frames\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "mock codec: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
