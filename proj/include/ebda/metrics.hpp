#pragma once

#include "ebda/video.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace ebda {

// Reported instead of +inf for a zero-MSE comparison.
inline constexpr double kLosslessPsnr = 100.0;

// Luma-only PSNR at the coding bit depth of `a`.
double psnr_luma(const Frame& a, const Frame& b);

// Mean of per-frame luma PSNR over two aligned sequences.
double sequence_psnr_luma(std::span<const Frame> a, std::span<const Frame> b);

struct RDPoint {
  double bitrate_kbps = 0.0;
  double psnr = 0.0;
};

// Rate-distortion curve: at least four points, strictly increasing bitrate,
// non-decreasing quality. Points are sorted on construction.
class RDCurve {
 public:
  explicit RDCurve(std::vector<RDPoint> points);

  std::span<const RDPoint> points() const { return points_; }

 private:
  std::vector<RDPoint> points_;
};

// Least-squares cubic in a centred, scaled variable t = (x - center) / scale.
// With exactly four samples it interpolates them.
struct CubicFit {
  Eigen::Vector4d coeffs;  // c0 + c1 t + c2 t^2 + c3 t^3
  double center = 0.0;
  double scale = 1.0;

  double operator()(double x) const;
  // Integral over [a, b] in the original variable.
  double integral(double a, double b) const;
};

CubicFit fit_cubic(std::span<const double> x, std::span<const double> y);

// Average bitrate difference in percent of `test` against `anchor` at equal
// quality. Lossless sentinel points are dropped before fitting.
double bd_rate(const RDCurve& anchor, const RDCurve& test);

// Average quality difference in dB of `test` against `anchor` at equal rate.
double bd_psnr(const RDCurve& anchor, const RDCurve& test);

}  // namespace ebda
