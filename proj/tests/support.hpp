#pragma once

// Shared generators and brute-force oracles for the test binaries. The
// oracles here are written directly from the layer equations with plain
// loops and std::vector, without touching the library's tensor code.

#include "ebda/mfrnet.hpp"
#include "ebda/video.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace ebda::test {

// Hand-rolled generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return rng_; }

  Plane plane(int w, int h, std::uint32_t max_value) {
    Plane p(h, w);
    std::uniform_int_distribution<std::uint32_t> d(0, max_value);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<std::uint16_t>(d(rng_));
    return p;
  }

  Frame frame(const VideoFormat& fmt) {
    Frame f = Frame::zeros(fmt);
    const auto max_value = fmt.bit_depth.reduced() ? fmt.bit_depth.max_effective() : fmt.bit_depth.max_coded();
    f.y = plane(fmt.width, fmt.height, max_value);
    f.cb = plane(fmt.chroma_width(), fmt.chroma_height(), max_value);
    f.cr = plane(fmt.chroma_width(), fmt.chroma_height(), max_value);
    return f;
  }

  Tensor tensor(int c, int h, int w, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(c, h, w);
    std::uniform_real_distribution<float> d(lo, hi);
    for (Eigen::Index i = 0; i < t.matrix().size(); ++i) t.matrix().data()[i] = d(rng_);
    return t;
  }

  std::vector<float> floats(std::size_t n, float lo = -1.0f, float hi = 1.0f) {
    std::vector<float> v(n);
    std::uniform_real_distribution<float> d(lo, hi);
    for (auto& x : v) x = d(rng_);
    return v;
  }

 private:
  std::mt19937_64 rng_;
};

inline VideoFormat make_format(int w, int h, ChromaFormat chroma = ChromaFormat::C420, int cbd = 10,
                               int ebd = 10, int frames = 1) {
  VideoFormat f;
  f.width = w;
  f.height = h;
  f.chroma = chroma;
  f.bit_depth = {cbd, ebd};
  f.frame_count = frames;
  return f;
}

// Smooth random texture in [0, 1]: a sum of random sinusoids. Sampled at
// continuous coordinates, so translated copies are exact.
struct Texture {
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;

  explicit Texture(std::uint64_t seed, int count = 12) {
    Gen g(seed);
    double total = 0.0;
    for (int i = 0; i < count; ++i) {
      Wave w{g.real(-0.35, 0.35), g.real(-0.35, 0.35), g.real(0.0, 6.283185307179586), g.real(0.3, 1.0)};
      total += w.amp;
      waves.push_back(w);
    }
    for (auto& w : waves) w.amp /= 2.0 * total;
  }

  double operator()(double x, double y) const {
    double v = 0.5;
    for (const auto& w : waves) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
    return v;
  }

  // Plane whose sample (r, c) is texture(c + dx, r + dy) at `bits` depth.
  Plane plane(int w, int h, double dx, double dy, int bits) const {
    Plane p(h, w);
    const double scale = std::ldexp(1.0, bits) - 1.0;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        p(r, c) = static_cast<std::uint16_t>(std::lround((*this)(c + dx, r + dy) * scale));
      }
    }
    return p;
  }
};

// Moving textured 4:2:0 sequence: frame t is the texture shifted by t*(vx, vy).
inline std::vector<Frame> moving_sequence(int w, int h, int frames, double vx, double vy,
                                          std::uint64_t seed, int cbd = 10) {
  const Texture luma(seed);
  const Texture cb(seed + 1, 6);
  const Texture cr(seed + 2, 6);
  std::vector<Frame> out;
  const VideoFormat fmt = make_format(w, h, ChromaFormat::C420, cbd, cbd, frames);
  for (int t = 0; t < frames; ++t) {
    Frame f = Frame::zeros(fmt);
    f.y = luma.plane(w, h, t * vx, t * vy, cbd);
    f.cb = cb.plane(w / 2, h / 2, t * vx / 2, t * vy / 2, cbd);
    f.cr = cr.plane(w / 2, h / 2, t * vx / 2, t * vy / 2, cbd);
    out.push_back(std::move(f));
  }
  return out;
}

// Non-owning conv view over flat OIHW kernel and bias vectors.
inline ConvWeightsOf<float> weights_of(const std::vector<float>& k, const std::vector<float>& b, int out, int in,
                                int kh, int kw) {
  ConvWeightsOf<float> w;
  w.kernel = k.data();
  w.bias = b.data();
  w.out_channels = out;
  w.in_channels = in;
  w.kernel_h = kh;
  w.kernel_w = kw;
  w.name = "test";
  return w;
}

inline Tensor from_flat(const std::vector<float>& v, int c, int h, int w) {
  Tensor t(c, h, w);
  for (int i = 0; i < c; ++i) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) t(i, y, x) = v[(static_cast<std::size_t>(i) * h + y) * w + x];
    }
  }
  return t;
}

// Brute-force same-padded cross-correlation on flat CHW arrays.
inline std::vector<float> conv_oracle(const std::vector<float>& in, int cin, int h, int w,
                                      const std::vector<float>& kernel, const std::vector<float>& bias,
                                      int cout, int kh, int kw) {
  std::vector<float> out(static_cast<std::size_t>(cout) * h * w);
  const int ph = kh / 2;
  const int pw = kw / 2;
  for (int o = 0; o < cout; ++o) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = bias[o];
        for (int i = 0; i < cin; ++i) {
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const int sy = y + ky - ph;
              const int sx = x + kx - pw;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              acc += static_cast<double>(kernel[((static_cast<std::size_t>(o) * cin + i) * kh + ky) * kw + kx]) *
                     in[(static_cast<std::size_t>(i) * h + sy) * w + sx];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * h + y) * w + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

// Straight-line reimplementation of the network on flat CHW buffers.
struct FlatNet {
  const Model& model;
  int h, w;

  std::vector<float> conv(const std::string& layer, const std::vector<float>& in, int cin) const {
    const auto& k = model.weights.at(layer + ".weight");
    const auto& b = model.weights.at(layer + ".bias");
    const int cout = static_cast<int>(k.dims[0]);
    if (static_cast<int>(k.dims[1]) != cin) throw std::runtime_error("oracle: channel mismatch in " + layer);
    std::vector<float> kv(k.values.data(), k.values.data() + k.values.size());
    std::vector<float> bv(b.values.data(), b.values.data() + b.values.size());
    return conv_oracle(in, cin, h, w, kv, bv, cout, static_cast<int>(k.dims[2]), static_cast<int>(k.dims[3]));
  }

  std::vector<float> leaky(std::vector<float> v) const {
    for (auto& x : v) x = x >= 0.0f ? x : model.config.leaky_slope * x;
    return v;
  }

  static std::vector<float> cat(const std::vector<float>& a, const std::vector<float>& b) {
    std::vector<float> out(a);
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }

  // Returns {block output, review}.
  std::pair<std::vector<float>, std::vector<float>> block(int b, const std::vector<float>& x,
                                                          const std::vector<float>* review) const {
    const auto& c = model.config;
    const std::string p = "block" + std::to_string(b) + ".";
    std::vector<float> start = review ? conv(p + "review", cat(x, *review), c.base_features + c.review_channels()) : x;
    std::vector<float> feats = start;
    std::vector<float> dense_all;
    for (int d = 0; d < c.dense_layers; ++d) {
      const auto out = leaky(conv(p + "dense" + std::to_string(d), feats, c.base_features + d * c.growth));
      feats = cat(feats, out);
      dense_all = cat(dense_all, out);
    }
    auto fused = conv(p + "fusion", feats, c.base_features + c.review_channels());
    for (std::size_t i = 0; i < fused.size(); ++i) fused[i] += x[i];
    return {fused, dense_all};
  }

  std::vector<float> forward(const std::vector<float>& input, const std::vector<float>& baseline) const {
    const auto& c = model.config;
    auto x = leaky(conv("shallow", input, c.input_channels()));
    std::vector<float> all_blocks;
    std::vector<float> review;
    for (int b = 0; b < c.num_blocks; ++b) {
      auto [out, rev] = block(b, x, b == 0 ? nullptr : &review);
      x = out;
      review = rev;
      all_blocks = cat(all_blocks, out);
    }
    auto g = conv("gff.fuse", all_blocks, c.num_blocks * c.base_features);
    g = conv("gff.conv", g, c.base_features);
    auto r = conv("recon", g, c.base_features);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += baseline[i];
    return r;
  }
};

inline std::vector<float> flatten(const Tensor& t) {
  std::vector<float> v(static_cast<std::size_t>(t.matrix().size()));
  for (int c = 0; c < t.channels(); ++c) {
    for (int y = 0; y < t.height(); ++y) {
      for (int x = 0; x < t.width(); ++x) v[(static_cast<std::size_t>(c) * t.height() + y) * t.width() + x] = t(c, y, x);
    }
  }
  return v;
}

inline double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("ebda-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ebda::test
