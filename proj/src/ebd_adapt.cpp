#include "ebda/ebd_adapt.hpp"

#include "ebda/errors.hpp"

#include <string>

namespace ebda {
namespace {

void check_shift(const Frame& frame, int shift) {
  if (shift < 0 || shift >= frame.format.bit_depth.cbd) {
    throw ParameterError("invalid EBD shift " + std::to_string(shift) + " for cbd " +
                         std::to_string(frame.format.bit_depth.cbd));
  }
}

}  // namespace

Frame ebd_down(const Frame& frame, int shift) {
  check_shift(frame, shift);
  if (frame.format.bit_depth.reduced()) {
    throw ParameterError("ebd_down: frame is already at reduced EBD " +
                         std::to_string(frame.format.bit_depth.ebd));
  }
  Frame out = frame;
  out.format.bit_depth.ebd = frame.format.bit_depth.cbd - shift;
  for (Plane* p : {&out.y, &out.cb, &out.cr}) {
    *p = p->unaryExpr([shift](std::uint16_t v) { return ebd_down_sample(v, shift); });
  }
  return out;
}

Frame ebd_up_naive(const Frame& frame, int shift) {
  check_shift(frame, shift);
  const int cbd = frame.format.bit_depth.cbd;
  Frame out = frame;
  out.format.bit_depth.ebd = cbd;
  for (Plane* p : {&out.y, &out.cb, &out.cr}) {
    *p = p->unaryExpr([shift, cbd](std::uint16_t v) { return ebd_up_sample(v, shift, cbd); });
  }
  return out;
}

Frame clamp_to_effective(const Frame& frame) {
  Frame out = frame;
  const auto limit = static_cast<std::uint16_t>(frame.format.bit_depth.max_effective());
  for (Plane* p : {&out.y, &out.cb, &out.cr}) *p = p->min(limit);
  return out;
}

}  // namespace ebda
