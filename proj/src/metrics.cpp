#include "ebda/metrics.hpp"

#include "ebda/errors.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

namespace ebda {
namespace {

struct Samples {
  std::vector<double> x;
  std::vector<double> y;
};

// Drops lossless sentinel points; the fit needs at least four survivors.
std::vector<RDPoint> finite_points(const RDCurve& curve) {
  std::vector<RDPoint> kept;
  for (const auto& p : curve.points()) {
    if (p.psnr >= kLosslessPsnr) {
      std::cerr << "warning: excluding lossless point at " << p.bitrate_kbps
                << " kbps from Bjontegaard fit\n";
      continue;
    }
    kept.push_back(p);
  }
  if (kept.size() < 4) {
    throw ParameterError("Bjontegaard fit needs 4 non-lossless points, got " + std::to_string(kept.size()));
  }
  return kept;
}

// Average of fit_b - fit_a over the overlap of their sample ranges.
double average_difference(const Samples& a, const Samples& b) {
  const auto [a_min, a_max] = std::minmax_element(a.x.begin(), a.x.end());
  const auto [b_min, b_max] = std::minmax_element(b.x.begin(), b.x.end());
  const double lo = std::max(*a_min, *b_min);
  const double hi = std::min(*a_max, *b_max);
  if (!(hi > lo)) {
    throw NonOverlappingCurvesError("RD curves do not overlap: [" + std::to_string(*a_min) + ", " +
                                    std::to_string(*a_max) + "] vs [" + std::to_string(*b_min) +
                                    ", " + std::to_string(*b_max) + "]");
  }
  const CubicFit fa = fit_cubic(a.x, a.y);
  const CubicFit fb = fit_cubic(b.x, b.y);
  return (fb.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
}

}  // namespace

double psnr_luma(const Frame& a, const Frame& b) {
  if (a.y.rows() != b.y.rows() || a.y.cols() != b.y.cols()) {
    throw ShapeError("psnr: luma planes differ in size (" + std::to_string(a.y.cols()) + "x" +
                     std::to_string(a.y.rows()) + " vs " + std::to_string(b.y.cols()) + "x" +
                     std::to_string(b.y.rows()) + ")");
  }
  if (a.format.bit_depth.cbd != b.format.bit_depth.cbd) {
    throw ShapeError("psnr: frames have different coding bit depths");
  }
  const Eigen::ArrayXXd diff = a.y.cast<double>() - b.y.cast<double>();
  const double mse = diff.square().mean();
  if (mse == 0.0) return kLosslessPsnr;
  const double peak = static_cast<double>(a.format.bit_depth.max_coded());
  return 10.0 * std::log10(peak * peak / mse);
}

double sequence_psnr_luma(std::span<const Frame> a, std::span<const Frame> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("psnr: sequences differ in length or are empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += psnr_luma(a[i], b[i]);
  return sum / static_cast<double>(a.size());
}

RDCurve::RDCurve(std::vector<RDPoint> points) : points_(std::move(points)) {
  if (points_.size() < 4) {
    throw ParameterError("RD curve needs at least 4 points, got " + std::to_string(points_.size()));
  }
  std::sort(points_.begin(), points_.end(),
            [](const RDPoint& l, const RDPoint& r) { return l.bitrate_kbps < r.bitrate_kbps; });
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!(p.bitrate_kbps > 0.0) || !std::isfinite(p.bitrate_kbps) || !std::isfinite(p.psnr)) {
      throw ParameterError("RD point with non-positive or non-finite values");
    }
    if (i > 0) {
      if (!(p.bitrate_kbps > points_[i - 1].bitrate_kbps)) {
        throw NonMonotoneCurveError("RD curve bitrates are not strictly increasing");
      }
      if (p.psnr < points_[i - 1].psnr) {
        throw NonMonotoneCurveError("RD curve quality decreases as bitrate increases at " +
                                    std::to_string(p.bitrate_kbps) + " kbps");
      }
    }
  }
}

double CubicFit::operator()(double x) const {
  const double t = (x - center) / scale;
  return coeffs[0] + t * (coeffs[1] + t * (coeffs[2] + t * coeffs[3]));
}

double CubicFit::integral(double a, double b) const {
  const auto antiderivative = [this](double x) {
    const double t = (x - center) / scale;
    return t * (coeffs[0] + t * (coeffs[1] / 2 + t * (coeffs[2] / 3 + t * coeffs[3] / 4)));
  };
  return scale * (antiderivative(b) - antiderivative(a));
}

CubicFit fit_cubic(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 4) {
    throw ParameterError("cubic fit needs at least 4 (x, y) pairs");
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  CubicFit fit;
  fit.center = 0.5 * (*lo + *hi);
  fit.scale = *hi > *lo ? 0.5 * (*hi - *lo) : 1.0;

  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd vandermonde(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = (x[i] - fit.center) / fit.scale;
    vandermonde(i, 0) = 1.0;
    vandermonde(i, 1) = t;
    vandermonde(i, 2) = t * t;
    vandermonde(i, 3) = t * t * t;
    rhs[i] = y[i];
  }
  fit.coeffs = vandermonde.colPivHouseholderQr().solve(rhs);
  return fit;
}

double bd_rate(const RDCurve& anchor, const RDCurve& test) {
  const auto to_samples = [](const std::vector<RDPoint>& pts) {
    Samples s;
    for (const auto& p : pts) {
      s.x.push_back(p.psnr);
      s.y.push_back(std::log10(p.bitrate_kbps));
    }
    return s;
  };
  const double d = average_difference(to_samples(finite_points(anchor)), to_samples(finite_points(test)));
  return (std::pow(10.0, d) - 1.0) * 100.0;
}

double bd_psnr(const RDCurve& anchor, const RDCurve& test) {
  const auto to_samples = [](const std::vector<RDPoint>& pts) {
    Samples s;
    for (const auto& p : pts) {
      s.x.push_back(std::log10(p.bitrate_kbps));
      s.y.push_back(p.psnr);
    }
    return s;
  };
  return average_difference(to_samples(finite_points(anchor)), to_samples(finite_points(test)));
}

}  // namespace ebda
