#include "ebda/dataset.hpp"

#include "ebda/binary_io.hpp"
#include "ebda/chroma.hpp"
#include "ebda/ebd_adapt.hpp"
#include "ebda/errors.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

namespace ebda {
namespace {

constexpr char kMagic[4] = {'E', 'B', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

void write_block(BinaryWriter& w, const Block& b) {
  for (const Plane& p : b.planes) {
    for (Eigen::Index i = 0; i < p.size(); ++i) w.u16(p.data()[i]);
  }
}

Block read_block(BinaryReader& r, int size) {
  Block b;
  for (Plane& p : b.planes) {
    p.resize(size, size);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = r.u16();
  }
  return b;
}

Block rotate_block(const Block& b, int k) {
  Block out;
  for (std::size_t c = 0; c < 3; ++c) out.planes[c] = rotate_quarter(b.planes[c], k);
  return out;
}

}  // namespace

bool operator==(const Block& a, const Block& b) {
  for (std::size_t c = 0; c < 3; ++c) {
    if (a.planes[c].rows() != b.planes[c].rows() || a.planes[c].cols() != b.planes[c].cols()) return false;
    if (!(a.planes[c] == b.planes[c]).all()) return false;
  }
  return true;
}

void DatasetManifest::validate() const {
  if (std::find(kQpGroups.begin(), kQpGroups.end(), static_cast<int>(qp_group)) == kQpGroups.end()) {
    throw ParameterError("qp_group " + std::to_string(qp_group) + " is not one of 22, 27, 32, 37");
  }
}

std::uint64_t SampleRng::below(std::uint64_t bound) {
  if (bound == 0) throw ParameterError("SampleRng::below: empty range");
  // 2^64 mod bound: values below it would bias the low residues.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t v = engine_();
    if (v >= threshold) return v % bound;
  }
}

Block extract_colour_block(const Frame& frame, int x, int y, int size) {
  if (frame.format.chroma != ChromaFormat::C444) {
    throw ParameterError("extract_colour_block: frame must be 4:4:4");
  }
  Block b;
  b.planes[0] = extract_block(frame, PlaneSelector::Y, x, y, size, size);
  b.planes[1] = extract_block(frame, PlaneSelector::Cb, x, y, size, size);
  b.planes[2] = extract_block(frame, PlaneSelector::Cr, x, y, size, size);
  return b;
}

Plane rotate_quarter(const Plane& plane, int k) {
  k = ((k % 4) + 4) % 4;
  if (plane.rows() != plane.cols()) throw ShapeError("rotate_quarter: plane must be square");
  const Eigen::Index n = plane.rows();
  Plane out(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      switch (k) {
        case 0: out(r, c) = plane(r, c); break;
        case 1: out(r, c) = plane(c, n - 1 - r); break;
        case 2: out(r, c) = plane(n - 1 - r, n - 1 - c); break;
        default: out(r, c) = plane(n - 1 - c, r); break;
      }
    }
  }
  return out;
}

TrainingSample augment_rotate(const TrainingSample& sample, int k) {
  TrainingSample out;
  for (std::size_t i = 0; i < 3; ++i) out.inputs[i] = rotate_block(sample.inputs[i], k);
  out.target = rotate_block(sample.target, k);
  out.meta = sample.meta;
  out.meta.rotation = static_cast<std::uint32_t>((sample.meta.rotation + ((k % 4) + 4) % 4) % 4);
  return out;
}

std::vector<TrainingSample> extract_triplets(std::span<const Frame> original,
                                             std::span<const Frame> reconstructed, int count,
                                             std::uint64_t seed, int block_size,
                                             std::uint32_t sequence_id) {
  if (original.size() != reconstructed.size()) {
    throw UnusableSourceError("original has " + std::to_string(original.size()) +
                              " frames, reconstruction has " + std::to_string(reconstructed.size()));
  }
  if (original.size() < 3) {
    throw UnusableSourceError("need at least 3 frames, got " + std::to_string(original.size()));
  }
  const VideoFormat& fmt = original.front().format;
  if (fmt.width < block_size || fmt.height < block_size) {
    throw UnusableSourceError("frames " + std::to_string(fmt.width) + "x" + std::to_string(fmt.height) +
                              " are smaller than the " + std::to_string(block_size) + " px block");
  }
  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto& a = original[i].format;
    const auto& b = reconstructed[i].format;
    if (a.width != fmt.width || a.height != fmt.height || b.width != fmt.width ||
        b.height != fmt.height || a.chroma != b.chroma) {
      throw UnusableSourceError("frame " + std::to_string(i) + " does not match the sequence format");
    }
  }
  if (count < 0) throw ParameterError("extract_triplets: negative count");

  const std::size_t n = original.size();
  std::vector<std::optional<Frame>> orig444(n);
  std::vector<std::optional<Frame>> recon444(n);
  const auto original_at = [&](std::size_t i) -> const Frame& {
    if (!orig444[i]) orig444[i] = yuv420_to_444(original[i]);
    return *orig444[i];
  };
  const auto recon_at = [&](std::size_t i) -> const Frame& {
    if (!recon444[i]) {
      const Frame& f = reconstructed[i];
      recon444[i] = yuv420_to_444(f.format.bit_depth.reduced() ? clamp_to_effective(f) : f);
    }
    return *recon444[i];
  };

  SampleRng rng(seed);
  std::vector<TrainingSample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    const auto centre = 1 + rng.below(n - 2);
    const auto x = static_cast<int>(rng.below(static_cast<std::uint64_t>(fmt.width - block_size + 1)));
    const auto y = static_cast<int>(rng.below(static_cast<std::uint64_t>(fmt.height - block_size + 1)));
    TrainingSample sample;
    for (std::size_t k = 0; k < 3; ++k) {
      sample.inputs[k] = extract_colour_block(recon_at(centre - 1 + k), x, y, block_size);
    }
    sample.target = extract_colour_block(original_at(centre), x, y, block_size);
    sample.meta = SampleMeta{sequence_id, static_cast<std::uint32_t>(centre), static_cast<std::uint32_t>(x),
                             static_cast<std::uint32_t>(y), 0, static_cast<std::uint32_t>(block_size)};
    samples.push_back(std::move(sample));
  }
  return samples;
}

void write_dataset(const std::filesystem::path& path, std::span<const TrainingSample> samples,
                   const DatasetManifest& manifest) {
  manifest.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  BinaryWriter w(out);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(manifest.qp_group);
  w.u64(manifest.seed);
  w.u64(samples.size());
  for (const auto& s : samples) {
    const int size = static_cast<int>(s.meta.block_size);
    for (const Block* b : {&s.inputs[0], &s.inputs[1], &s.inputs[2], &s.target}) {
      for (const Plane& p : b->planes) {
        if (p.rows() != size || p.cols() != size) {
          throw ShapeError("write_dataset: block does not match meta.block_size " + std::to_string(size));
        }
      }
    }
    for (auto v : {s.meta.sequence_id, s.meta.frame_index, s.meta.x, s.meta.y, s.meta.rotation,
                   s.meta.block_size}) {
      w.u32(v);
    }
    for (const auto& b : s.inputs) write_block(w, b);
    write_block(w, s.target);
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw FormatError("'" + path.string() + "' is not an EBDS dataset (bad magic)");
  }
  if (const auto v = r.u32(); v != kVersion) {
    throw FormatError("'" + path.string() + "': unsupported dataset version " + std::to_string(v));
  }
  Dataset ds;
  ds.manifest.qp_group = r.u32();
  ds.manifest.seed = r.u64();
  ds.manifest.sample_count = r.u64();
  try {
    ds.manifest.validate();
  } catch (const ParameterError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  for (std::uint64_t i = 0; i < ds.manifest.sample_count; ++i) {
    TrainingSample s;
    s.meta.sequence_id = r.u32();
    s.meta.frame_index = r.u32();
    s.meta.x = r.u32();
    s.meta.y = r.u32();
    s.meta.rotation = r.u32();
    s.meta.block_size = r.u32();
    if (s.meta.block_size == 0 || s.meta.block_size > 4096 || s.meta.rotation > 3) {
      throw FormatError("'" + path.string() + "': corrupt meta in sample " + std::to_string(i));
    }
    const int size = static_cast<int>(s.meta.block_size);
    for (auto& b : s.inputs) b = read_block(r, size);
    s.target = read_block(r, size);
    ds.samples.push_back(std::move(s));
  }
  if (!r.at_end()) {
    throw FormatError("'" + path.string() + "': body holds more data than the header's sample count");
  }
  return ds;
}

}  // namespace ebda
