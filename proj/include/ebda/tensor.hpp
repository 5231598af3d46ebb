#pragma once

#include "ebda/errors.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace ebda {

template <typename Scalar>
using RowMatrixOf = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense (channels, height, width) activation tensor. Stored as a
// channels x (height * width) row-major matrix so that a convolution over
// all channels is a matrix product.
template <typename Scalar>
class TensorOf {
 public:
  using Matrix = RowMatrixOf<Scalar>;

  TensorOf() = default;
  TensorOf(int channels, int height, int width)
      : height_(height), width_(width), data_(channels, Eigen::Index{height} * width) {}
  TensorOf(Matrix data, int height, int width) : height_(height), width_(width), data_(std::move(data)) {
    if (data_.cols() != Eigen::Index{height} * width) {
      throw ShapeError("tensor: matrix has " + std::to_string(data_.cols()) + " columns, expected " +
                       std::to_string(Eigen::Index{height} * width));
    }
  }

  static TensorOf Zero(int channels, int height, int width) {
    TensorOf t(channels, height, width);
    t.data_.setZero();
    return t;
  }

  int channels() const { return static_cast<int>(data_.rows()); }
  int height() const { return height_; }
  int width() const { return width_; }
  Eigen::Index size() const { return data_.size(); }

  Scalar& operator()(int c, int y, int x) { return data_(c, Eigen::Index{y} * width_ + x); }
  Scalar operator()(int c, int y, int x) const { return data_(c, Eigen::Index{y} * width_ + x); }

  Matrix& matrix() { return data_; }
  const Matrix& matrix() const { return data_; }

  // One channel as a height x width row-major view.
  auto channel(int c) {
    return Eigen::Map<Matrix>(data_.row(c).data(), height_, width_);
  }
  auto channel(int c) const {
    return Eigen::Map<const Matrix>(data_.row(c).data(), height_, width_);
  }

  bool same_shape(const TensorOf& other) const {
    return channels() == other.channels() && height_ == other.height_ && width_ == other.width_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  Matrix data_;
};

using Tensor = TensorOf<float>;

// Read-only view of a convolution kernel laid out (out_ch, in_ch, kh, kw),
// row-major, with a matching (out_ch) bias.
template <typename Scalar>
struct ConvWeightsOf {
  const Scalar* kernel = nullptr;
  const Scalar* bias = nullptr;
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  std::string name = "conv";
};

namespace detail {

// out (Cout x H*W) = conv(in (Cin x H*W)) + bias, zero "same" padding.
// Each kernel tap is one GEMM against a shifted view of a padded copy of the
// input; output rows are computed over the padded width and cropped.
template <typename Scalar, typename InDerived, typename OutDerived>
void conv2d_matrix(const Eigen::MatrixBase<InDerived>& in, int height, int width,
                   const ConvWeightsOf<Scalar>& w, Eigen::MatrixBase<OutDerived>& out) {
  using Matrix = RowMatrixOf<Scalar>;
  using KernelMap = Eigen::Map<const Matrix>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  const Eigen::Index taps = Eigen::Index{w.kernel_h} * w.kernel_w;
  const KernelMap kernel(w.kernel, w.out_channels, Eigen::Index{w.in_channels} * taps);
  const Eigen::Map<const Vector> bias(w.bias, w.out_channels);

  if (taps == 1) {
    out.derived().noalias() = kernel * in;
    out.derived().colwise() += bias;
    return;
  }

  const int pad_y = w.kernel_h / 2;
  const int pad_x = w.kernel_w / 2;
  const Eigen::Index padded_w = width + 2 * pad_x;
  const Eigen::Index padded_h = height + 2 * pad_y;
  const Eigen::Index row_len = padded_h * padded_w + w.kernel_w - 1;

  Matrix padded = Matrix::Zero(w.in_channels, row_len);
  for (Eigen::Index c = 0; c < w.in_channels; ++c) {
    for (int y = 0; y < height; ++y) {
      padded.row(c).segment((y + pad_y) * padded_w + pad_x, width) =
          in.row(c).segment(Eigen::Index{y} * width, width);
    }
  }

  Matrix wide = Matrix::Zero(w.out_channels, Eigen::Index{height} * padded_w);
  using Strided = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
  for (int ky = 0; ky < w.kernel_h; ++ky) {
    for (int kx = 0; kx < w.kernel_w; ++kx) {
      const Eigen::Index tap = Eigen::Index{ky} * w.kernel_w + kx;
      const Eigen::Map<const Matrix, 0, Strided> tap_kernel(w.kernel + tap, w.out_channels,
                                                            w.in_channels, Strided(w.in_channels * taps, taps));
      const Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> shifted(
          padded.data() + ky * padded_w + kx, w.in_channels, Eigen::Index{height} * padded_w,
          Eigen::OuterStride<>(row_len));
      wide.noalias() += Matrix(tap_kernel) * shifted;
    }
  }

  for (int y = 0; y < height; ++y) {
    out.derived().middleCols(Eigen::Index{y} * width, width) =
        wide.middleCols(Eigen::Index{y} * padded_w, width);
  }
  out.derived().colwise() += bias;
}

template <typename Scalar>
void check_conv_shapes(Eigen::Index in_channels, const ConvWeightsOf<Scalar>& w) {
  if (w.kernel_h % 2 == 0 || w.kernel_w % 2 == 0) {
    throw ShapeError("layer '" + w.name + "': kernel dims must be odd, got " +
                     std::to_string(w.kernel_h) + "x" + std::to_string(w.kernel_w));
  }
  if (in_channels != w.in_channels) {
    throw ShapeError("layer '" + w.name + "': expects " + std::to_string(w.in_channels) +
                     " input channels, got " + std::to_string(in_channels));
  }
}

}  // namespace detail

// Cross-correlation with zero "same" padding plus bias.
template <typename Scalar>
TensorOf<Scalar> conv2d(const TensorOf<Scalar>& input, const ConvWeightsOf<Scalar>& weights) {
  detail::check_conv_shapes(input.channels(), weights);
  TensorOf<Scalar> out(weights.out_channels, input.height(), input.width());
  detail::conv2d_matrix(input.matrix(), input.height(), input.width(), weights, out.matrix());
  return out;
}

// Convolution over the first `in_channels` rows of `features`; used by dense
// blocks that grow a single feature buffer in place.
template <typename Scalar, typename InDerived>
TensorOf<Scalar> conv2d_rows(const Eigen::MatrixBase<InDerived>& features, int height, int width,
                             const ConvWeightsOf<Scalar>& weights) {
  detail::check_conv_shapes(features.rows(), weights);
  TensorOf<Scalar> out(weights.out_channels, height, width);
  detail::conv2d_matrix(features, height, width, weights, out.matrix());
  return out;
}

template <typename Scalar>
TensorOf<Scalar> leaky_relu(TensorOf<Scalar> t, Scalar slope) {
  t.matrix() = t.matrix().unaryExpr([slope](Scalar x) { return x >= Scalar(0) ? x : slope * x; });
  return t;
}

// Channel-wise concatenation of tensors sharing height and width.
template <typename Scalar>
TensorOf<Scalar> concat_channels(std::initializer_list<const TensorOf<Scalar>*> parts) {
  int channels = 0;
  const TensorOf<Scalar>& first = **parts.begin();
  for (const auto* p : parts) {
    if (p->height() != first.height() || p->width() != first.width()) {
      throw ShapeError("concat: spatial dimensions differ");
    }
    channels += p->channels();
  }
  TensorOf<Scalar> out(channels, first.height(), first.width());
  Eigen::Index row = 0;
  for (const auto* p : parts) {
    out.matrix().middleRows(row, p->channels()) = p->matrix();
    row += p->channels();
  }
  return out;
}

template <typename Scalar>
TensorOf<Scalar> concat_channels(const std::vector<TensorOf<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Eigen::Index channels = 0;
  for (const auto& p : parts) {
    if (p.height() != parts[0].height() || p.width() != parts[0].width()) {
      throw ShapeError("concat: spatial dimensions differ");
    }
    channels += p.channels();
  }
  TensorOf<Scalar> out(static_cast<int>(channels), parts[0].height(), parts[0].width());
  Eigen::Index row = 0;
  for (const auto& p : parts) {
    out.matrix().middleRows(row, p.channels()) = p.matrix();
    row += p.channels();
  }
  return out;
}

}  // namespace ebda
