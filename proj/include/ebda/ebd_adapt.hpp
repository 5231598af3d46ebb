#pragma once

#include "ebda/video.hpp"

#include <cstdint>

namespace ebda {

// Logical right shift of one sample.
constexpr std::uint16_t ebd_down_sample(std::uint16_t v, int shift) {
  return static_cast<std::uint16_t>(v >> shift);
}

// Left shift without LSB replication, clipped to the coded range.
constexpr std::uint16_t ebd_up_sample(std::uint16_t v, int shift, int cbd) {
  const std::uint32_t up = static_cast<std::uint32_t>(v) << shift;
  const std::uint32_t max = (1u << cbd) - 1u;
  return static_cast<std::uint16_t>(up > max ? max : up);
}

// Reduce the effective bit depth of a full-EBD frame by `shift` bits. The
// coding bit depth is unchanged; the result is tagged ebd = cbd - shift.
Frame ebd_down(const Frame& frame, int shift);

// Naive inverse of ebd_down. The result is tagged full-EBD.
Frame ebd_up_naive(const Frame& frame, int shift);

// Clamp every sample of a reduced frame to its effective range. Decoders run
// at the coding bit depth and can overshoot 2^ebd - 1.
Frame clamp_to_effective(const Frame& frame);

}  // namespace ebda
