#include "support.hpp"

#include "ebda/chroma.hpp"
#include "ebda/ebd_adapt.hpp"
#include "ebda/errors.hpp"

#include <doctest.h>

#include <fstream>

using namespace ebda;
using namespace ebda::test;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

bool same_frame(const Frame& a, const Frame& b) {
  return a.y.rows() == b.y.rows() && a.y.cols() == b.y.cols() && (a.y == b.y).all() &&
         a.cb.rows() == b.cb.rows() && (a.cb == b.cb).all() && a.cr.rows() == b.cr.rows() &&
         (a.cr == b.cr).all();
}

}  // namespace

TEST_SUITE("video_core") {
  TEST_CASE("bit depth config limits") {
    CHECK_NOTHROW((BitDepthConfig{10, 9}.validate()));
    CHECK_NOTHROW((BitDepthConfig{16, 1}.validate()));
    CHECK_THROWS_AS((BitDepthConfig{10, 11}.validate()), ParameterError);
    CHECK_THROWS_AS((BitDepthConfig{17, 10}.validate()), ParameterError);
    CHECK_THROWS_AS((BitDepthConfig{10, 0}.validate()), ParameterError);
    CHECK((BitDepthConfig{10, 9}.shift()) == 1);
    CHECK((BitDepthConfig{10, 9}.max_effective()) == 511);
    CHECK((BitDepthConfig{10, 9}.max_coded()) == 1023);
  }

  TEST_CASE("video format rejects odd 4:2:0 and empty sequences") {
    CHECK_THROWS_AS(make_format(5, 4).validate(), ParameterError);
    CHECK_THROWS_AS(make_format(4, 3).validate(), ParameterError);
    CHECK_NOTHROW(make_format(5, 3, ChromaFormat::C444).validate());
    CHECK_THROWS_AS(make_format(4, 4, ChromaFormat::C420, 10, 10, 0).validate(), ParameterError);
  }

  TEST_CASE("frame zeros follows the chroma layout") {
    const Frame f = Frame::zeros(make_format(8, 6));
    CHECK(f.cb.cols() == 4);
    CHECK(f.cb.rows() == 3);
    CHECK(f.cr.cols() == 4);
    const Frame g = Frame::zeros(make_format(8, 6, ChromaFormat::C444));
    CHECK(g.cb.cols() == 8);
    CHECK(g.cb.rows() == 6);
  }

  TEST_CASE("all-zero 2-frame 4x4 file reads as zero planes") {
    const auto dir = scratch_dir("yuv-zero");
    const auto path = dir / "zero.yuv";
    write_bytes(path, std::vector<char>(2 * 48, 0));
    const auto frames = read_yuv_all(path, make_format(4, 4, ChromaFormat::C420, 10, 10, 2));
    REQUIRE(frames.size() == 2);
    for (const auto& f : frames) {
      CHECK((f.y == 0).all());
      CHECK((f.cb == 0).all());
      CHECK((f.cr == 0).all());
    }
  }

  TEST_CASE("byte size formula") {
    const auto dir = scratch_dir("yuv-size");
    // 4x4 4:2:0 10-bit: (16 + 4 + 4) samples x 2 bytes.
    const Frame a = Frame::zeros(make_format(4, 4));
    CHECK(write_yuv(dir / "a.yuv", std::span(&a, 1)) == 48);
    CHECK(std::filesystem::file_size(dir / "a.yuv") == 48);
    // 2x2 4:4:4 8-bit: 3 planes x 4 samples x 1 byte.
    const Frame b = Frame::zeros(make_format(2, 2, ChromaFormat::C444, 8, 8));
    CHECK(write_yuv(dir / "b.yuv", std::span(&b, 1)) == 12);

    Gen g(7);
    for (int trial = 0; trial < 20; ++trial) {
      const bool c420 = g.coin();
      const int w = 2 * g.integer(1, 12);
      const int h = 2 * g.integer(1, 12);
      const int cbd = g.integer(1, 16);
      const int frames = g.integer(1, 3);
      const auto fmt = make_format(w, h, c420 ? ChromaFormat::C420 : ChromaFormat::C444, cbd, cbd);
      std::vector<Frame> seq(static_cast<std::size_t>(frames), Frame::zeros(fmt));
      const std::uint64_t chroma = c420 ? 2ull * (w / 2) * (h / 2) : 2ull * w * h;
      const std::uint64_t expected = frames * (std::uint64_t(w) * h + chroma) * (cbd <= 8 ? 1 : 2);
      CHECK(write_yuv(dir / "c.yuv", seq) == expected);
    }
  }

  TEST_CASE("little-endian 16-bit container") {
    const auto dir = scratch_dir("yuv-le");
    Frame f = Frame::zeros(make_format(2, 2));
    f.y(0, 0) = 0x0302;
    write_yuv(dir / "le.yuv", std::span(&f, 1));
    const auto bytes = slurp(dir / "le.yuv");
    CHECK(bytes[0] == 0x02);
    CHECK(bytes[1] == 0x03);
  }

  TEST_CASE("write then read is the identity (property)") {
    const auto dir = scratch_dir("yuv-rt");
    Gen g(11);
    for (int trial = 0; trial < 40; ++trial) {
      const bool c420 = g.coin();
      const int w = 2 * g.integer(1, 10);
      const int h = 2 * g.integer(1, 10);
      const int cbd = g.integer(1, 16);
      auto fmt = make_format(w, h, c420 ? ChromaFormat::C420 : ChromaFormat::C444, cbd, cbd, g.integer(1, 3));
      std::vector<Frame> seq;
      for (int i = 0; i < fmt.frame_count; ++i) seq.push_back(g.frame(fmt));
      write_yuv(dir / "rt.yuv", seq);
      const auto back = read_yuv_all(dir / "rt.yuv", fmt);
      REQUIRE(back.size() == seq.size());
      for (std::size_t i = 0; i < seq.size(); ++i) {
        CHECK(same_frame(seq[i], back[i]));
        CHECK(back[i].y.maxCoeff() <= fmt.bit_depth.max_coded());
      }
    }
  }

  TEST_CASE("truncated file is malformed and names the byte counts") {
    const auto dir = scratch_dir("yuv-trunc");
    const auto path = dir / "t.yuv";
    write_bytes(path, std::vector<char>(47, 0));
    try {
      read_yuv_all(path, make_format(4, 4));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("48") != std::string::npos);
      CHECK(msg.find("47") != std::string::npos);
    }
    write_bytes(path, std::vector<char>(48 + 1, 0));
    CHECK_THROWS_AS(read_yuv_all(path, make_format(4, 4)), FormatError);
  }

  TEST_CASE("sample above the coded range") {
    const auto dir = scratch_dir("yuv-range");
    const auto path = dir / "r.yuv";
    std::vector<char> bytes(48, 0);
    bytes[0] = static_cast<char>(0x00);
    bytes[1] = static_cast<char>(0x04);  // 1024 in a 10-bit file
    write_bytes(path, bytes);
    CHECK_THROWS_AS(read_yuv_all(path, make_format(4, 4)), RangeError);
    const auto masked = read_yuv_all(path, make_format(4, 4), RangePolicy::Mask);
    CHECK(masked[0].y(0, 0) == 0);
  }

  TEST_CASE("missing file is an I/O error") {
    CHECK_THROWS_AS(read_yuv_all("/nonexistent/ebda.yuv", make_format(4, 4)), IoError);
  }

  TEST_CASE("write rejects empty and mixed input") {
    const auto dir = scratch_dir("yuv-empty");
    CHECK_THROWS_AS(write_yuv(dir / "e.yuv", std::span<const Frame>{}), ParameterError);
    CHECK_FALSE(std::filesystem::exists(dir / "e.yuv"));
    const std::vector<Frame> mixed = {Frame::zeros(make_format(4, 4)), Frame::zeros(make_format(6, 4))};
    CHECK_THROWS_AS(write_yuv(dir / "m.yuv", mixed), ShapeError);
  }

  TEST_CASE("reader streams frame by frame") {
    const auto dir = scratch_dir("yuv-stream");
    Gen g(3);
    const auto fmt = make_format(6, 4, ChromaFormat::C420, 10, 10, 3);
    std::vector<Frame> seq = {g.frame(fmt), g.frame(fmt), g.frame(fmt)};
    write_yuv(dir / "s.yuv", seq);
    YuvReader reader = read_yuv(dir / "s.yuv", fmt);
    int n = 0;
    while (auto f = reader.next()) {
      CHECK(same_frame(*f, seq[static_cast<std::size_t>(n)]));
      ++n;
    }
    CHECK(n == 3);
    CHECK(reader.frames_read() == 3);
  }

  TEST_CASE("extract_block") {
    Frame f = Frame::zeros(make_format(4, 4, ChromaFormat::C444));
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) f.y(r, c) = static_cast<std::uint16_t>(r * 4 + c);
    }
    const Plane whole = extract_block(f, PlaneSelector::Y, 0, 0, 4, 4);
    CHECK((whole == f.y).all());
    const Plane b = extract_block(f, PlaneSelector::Y, 1, 1, 2, 2);
    CHECK(b(0, 0) == 5);
    CHECK(b(0, 1) == 6);
    CHECK(b(1, 0) == 9);
    CHECK(b(1, 1) == 10);
    try {
      extract_block(f, PlaneSelector::Y, 3, 0, 2, 2);
      FAIL("expected BoundsError");
    } catch (const BoundsError& e) {
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    CHECK_THROWS_AS(extract_block(f, PlaneSelector::Y, 0, 3, 1, 2), BoundsError);
    CHECK_THROWS_AS(extract_block(f, PlaneSelector::Y, -1, 0, 1, 1), BoundsError);
  }

  TEST_CASE("sample range check honours the reduced tag") {
    Frame f = Frame::zeros(make_format(4, 4, ChromaFormat::C420, 10, 9));
    f.y(0, 0) = 511;
    CHECK_NOTHROW(check_sample_range(f));
    f.y(0, 0) = 512;
    CHECK_THROWS_AS(check_sample_range(f), RangeError);
    f.format.bit_depth.ebd = 10;
    CHECK_NOTHROW(check_sample_range(f));
  }
}

TEST_SUITE("ebd_adapt") {
  TEST_CASE("sample arithmetic") {
    CHECK(ebd_down_sample(1023, 1) == 511);
    CHECK(ebd_down_sample(0, 3) == 0);
    CHECK(ebd_down_sample(514, 1) == 257);
    CHECK(ebd_up_sample(511, 1, 10) == 1022);
    CHECK(ebd_up_sample(0, 1, 10) == 0);
  }

  TEST_CASE("round trip bound, exhaustive for cbd <= 12") {
    for (int cbd = 1; cbd <= 12; ++cbd) {
      for (int s = 0; s < cbd; ++s) {
        const int bound = (1 << s) - 1;
        for (int v = 0; v < (1 << cbd); ++v) {
          const int back = ebd_up_sample(ebd_down_sample(static_cast<std::uint16_t>(v), s), s, cbd);
          if (std::abs(back - v) > bound) {
            FAIL("cbd " << cbd << " shift " << s << " v " << v << " -> " << back);
          }
        }
      }
    }
  }

  TEST_CASE("monotonicity and down after up") {
    for (int s = 1; s <= 3; ++s) {
      for (int v = 1; v < 1024; ++v) {
        CHECK_LE(ebd_down_sample(static_cast<std::uint16_t>(v - 1), s), ebd_down_sample(static_cast<std::uint16_t>(v), s));
      }
      const int reduced_max = (1 << (10 - s)) - 1;
      for (int v = 0; v <= reduced_max; ++v) {
        const auto up = ebd_up_sample(static_cast<std::uint16_t>(v), s, 10);
        if (v > 0) CHECK_GT(up, ebd_up_sample(static_cast<std::uint16_t>(v - 1), s, 10));
        CHECK(ebd_down_sample(up, s) == v);
      }
    }
  }

  TEST_CASE("frame-level down/up retag and validate") {
    Gen g(5);
    const Frame f = g.frame(make_format(8, 8));
    const Frame d = ebd_down(f, 1);
    CHECK(d.format.bit_depth.ebd == 9);
    CHECK(d.format.bit_depth.cbd == 10);
    CHECK_NOTHROW(check_sample_range(d));
    const Frame u = ebd_up_naive(d, 1);
    CHECK(u.format.bit_depth.ebd == 10);
    CHECK(((u.y.cast<int>() - f.y.cast<int>()).abs() <= 1).all());
    CHECK(((u.cb.cast<int>() - f.cb.cast<int>()).abs() <= 1).all());
    CHECK_THROWS_AS(ebd_down(f, 10), ParameterError);
    CHECK_THROWS_AS(ebd_down(f, -1), ParameterError);
    CHECK_THROWS_AS(ebd_up_naive(d, 10), ParameterError);
    CHECK_NOTHROW(ebd_down(f, 0));
  }

  TEST_CASE("clamp_to_effective") {
    Frame f = Frame::zeros(make_format(4, 4, ChromaFormat::C420, 10, 9));
    f.y(1, 1) = 700;
    f.cb(0, 0) = 1023;
    const Frame c = clamp_to_effective(f);
    CHECK(c.y(1, 1) == 511);
    CHECK(c.cb(0, 0) == 511);
    CHECK_NOTHROW(check_sample_range(c));
  }
}

TEST_SUITE("chroma") {
  TEST_CASE("420 -> 444 replicates and 444 -> 420 inverts it") {
    Gen g(9);
    for (int trial = 0; trial < 10; ++trial) {
      const Frame f = g.frame(make_format(2 * g.integer(1, 8), 2 * g.integer(1, 8)));
      bool already = true;
      const Frame full = yuv420_to_444(f, &already);
      CHECK_FALSE(already);
      CHECK(full.format.chroma == ChromaFormat::C444);
      CHECK((full.y == f.y).all());
      for (int r = 0; r < full.cb.rows(); ++r) {
        for (int c = 0; c < full.cb.cols(); ++c) CHECK(full.cb(r, c) == f.cb(r / 2, c / 2));
      }
      CHECK(same_frame(yuv444_to_420(full), f));
    }
  }

  TEST_CASE("444 input passes through") {
    Gen g(2);
    const Frame f = g.frame(make_format(4, 4, ChromaFormat::C444));
    bool already = false;
    CHECK(same_frame(yuv420_to_444(f, &already), f));
    CHECK(already);
  }

  TEST_CASE("2x2 mean rounds half away from zero") {
    Frame f = Frame::zeros(make_format(2, 2, ChromaFormat::C444));
    f.cb << 1, 2, 2, 1;  // mean 1.5
    f.cr << 0, 0, 0, 1;  // mean 0.25
    const Frame d = yuv444_to_420(f);
    CHECK(d.cb(0, 0) == 2);
    CHECK(d.cr(0, 0) == 0);
    CHECK_THROWS_AS(yuv444_to_420(Frame::zeros(make_format(4, 4))), ParameterError);
    CHECK_THROWS_AS(yuv444_to_420(Frame::zeros(make_format(3, 2, ChromaFormat::C444))), ShapeError);
  }
}
