#pragma once

#include "ebda/video.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ebda {

// Three co-located square planes (Y, Cb, Cr) of one 4:4:4 frame.
struct Block {
  std::array<Plane, 3> planes;

  int size() const { return static_cast<int>(planes[0].rows()); }
  friend bool operator==(const Block& a, const Block& b);
};

struct SampleMeta {
  std::uint32_t sequence_id = 0;
  std::uint32_t frame_index = 0;  // centre frame
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t rotation = 0;     // quarter turns, counter-clockwise
  std::uint32_t block_size = 96;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

// Reduced-EBD prev/cur/next input blocks plus the full-EBD original centre
// block, all 4:4:4 and co-located.
struct TrainingSample {
  std::array<Block, 3> inputs;
  Block target;
  SampleMeta meta;

  friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

inline constexpr std::array<int, 4> kQpGroups = {22, 27, 32, 37};

struct DatasetManifest {
  std::uint32_t qp_group = 22;
  std::uint64_t seed = 0;
  std::uint64_t sample_count = 0;
  std::vector<std::string> sources;  // not serialised

  void validate() const;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<TrainingSample> samples;
};

// Copy of the size x size block at (x, y) of every plane of a 4:4:4 frame.
Block extract_colour_block(const Frame& frame444, int x, int y, int size);

// Rotate a square plane by k quarter turns counter-clockwise (k taken mod 4).
Plane rotate_quarter(const Plane& plane, int k);

// Rotates all four blocks by k quarter turns; meta.rotation accumulates mod 4.
TrainingSample augment_rotate(const TrainingSample& sample, int k);

// Samples `count` co-located triplets. Block origins are uniform over valid
// positions and centre frames uniform over [1, N-2]; deterministic for a seed.
std::vector<TrainingSample> extract_triplets(std::span<const Frame> original,
                                             std::span<const Frame> reconstructed, int count,
                                             std::uint64_t seed, int block_size = 96,
                                             std::uint32_t sequence_id = 0);

// EBDS file: magic "EBDS", u32 version = 1, u32 qp_group, u64 seed,
// u64 count, then per sample 6 x u32 meta (sequence_id, frame_index, x, y,
// rotation, block_size) and four blocks (prev, cur, next, target) of u16
// samples in C, H, W order. Little-endian throughout.
void write_dataset(const std::filesystem::path& path, std::span<const TrainingSample> samples,
                   const DatasetManifest& manifest);
Dataset read_dataset(const std::filesystem::path& path);

// Unbiased integer in [0, bound) drawn from a 64-bit Mersenne Twister by
// rejection, so sequences match across standard library implementations.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace ebda
