#include "smokeseg/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "smokeseg/common.hpp"

namespace smokeseg {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;

int conv_out_dim(int d, int stride) { return (d - 1) / stride + 1; }

// Unfolds 3x3 receptive fields into a (in_c * 9) x (out_h * out_w) matrix,
// one column per output pixel.
ColMat im2col(const Tensor& x, int stride, int out_h, int out_w) {
  const int k = x.channels * 9;
  ColMat col(k, static_cast<Eigen::Index>(out_h) * out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const Eigen::Index n = static_cast<Eigen::Index>(oy) * out_w + ox;
      double* dst = col.col(n).data();
      for (int c = 0; c < x.channels; ++c) {
        const double* plane = x.v.data() + c * x.plane();
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            *dst++ = (iy >= 0 && iy < x.height && ix >= 0 && ix < x.width)
                         ? plane[static_cast<std::size_t>(iy) * x.width + ix]
                         : 0.0;
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const ColMat& col, int stride, int out_h, int out_w, Tensor& x) {
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const Eigen::Index n = static_cast<Eigen::Index>(oy) * out_w + ox;
      const double* src = col.col(n).data();
      for (int c = 0; c < x.channels; ++c) {
        double* plane = x.v.data() + c * x.plane();
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            const double g = *src++;
            if (iy >= 0 && iy < x.height && ix >= 0 && ix < x.width) {
              plane[static_cast<std::size_t>(iy) * x.width + ix] += g;
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor image_to_tensor(const cv::Mat& image) {
  if (image.empty() || image.type() != CV_8UC3) {
    throw Error("image_to_tensor: expected non-empty 8-bit 3-channel image");
  }
  Tensor t = Tensor::zeros(3, image.rows, image.cols);
  for (int y = 0; y < image.rows; ++y) {
    const auto* row = image.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.cols; ++x) {
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = row[x][c] / 255.0 - 0.5;
    }
  }
  return t;
}

Grid sigmoid(const Grid& logits) {
  Grid p = logits;
  for (auto& z : p.v) z = 1.0 / (1.0 + std::exp(-z));
  return p;
}

Grid resize_bilinear(const Grid& src, int out_height, int out_width) {
  if (src.height <= 0 || src.width <= 0) throw Error("resize_bilinear: empty grid");
  Grid dst = Grid::zeros(out_height, out_width);
  const double sy_scale = static_cast<double>(src.height) / out_height;
  const double sx_scale = static_cast<double>(src.width) / out_width;
  for (int oy = 0; oy < out_height; ++oy) {
    const double sy = (oy + 0.5) * sy_scale - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, src.height - 1);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
    for (int ox = 0; ox < out_width; ++ox) {
      const double sx = (ox + 0.5) * sx_scale - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, src.width - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
      dst.at(oy, ox) = (1 - wy) * ((1 - wx) * src.at(y0, x0) + wx * src.at(y0, x1)) +
                       wy * ((1 - wx) * src.at(y1, x0) + wx * src.at(y1, x1));
    }
  }
  return dst;
}

void conv3x3_forward(const Tensor& x, std::span<const double> weights,
                     std::span<const double> bias, int out_channels, int stride, Tensor& y) {
  const int k = x.channels * 9;
  if (weights.size() != static_cast<std::size_t>(out_channels) * k ||
      bias.size() != static_cast<std::size_t>(out_channels)) {
    throw Error("conv3x3_forward: weight/bias size mismatch");
  }
  const int out_h = conv_out_dim(x.height, stride);
  const int out_w = conv_out_dim(x.width, stride);
  y = Tensor::zeros(out_channels, out_h, out_w);

  const ColMat col = im2col(x, stride, out_h, out_w);
  Eigen::Map<const RowMat> w_mat(weights.data(), out_channels, k);
  Eigen::Map<RowMat> y_mat(y.v.data(), out_channels, col.cols());
  y_mat.noalias() = w_mat * col;
  for (int oc = 0; oc < out_channels; ++oc) y_mat.row(oc).array() += bias[oc];
}

void conv3x3_backward(const Tensor& x, std::span<const double> weights, int out_channels,
                      int stride, const Tensor& dy, Tensor* dx, std::span<double> dweights,
                      std::span<double> dbias) {
  const int k = x.channels * 9;
  const int out_h = dy.height;
  const int out_w = dy.width;
  const ColMat col = im2col(x, stride, out_h, out_w);
  Eigen::Map<const RowMat> dy_mat(dy.v.data(), out_channels, col.cols());

  Eigen::Map<RowMat> dw_mat(dweights.data(), out_channels, k);
  dw_mat.noalias() += dy_mat * col.transpose();
  for (int oc = 0; oc < out_channels; ++oc) dbias[oc] += dy_mat.row(oc).sum();

  if (dx) {
    Eigen::Map<const RowMat> w_mat(weights.data(), out_channels, k);
    ColMat dcol(k, col.cols());
    dcol.noalias() = w_mat.transpose() * dy_mat;
    *dx = Tensor::zeros(x.channels, x.height, x.width);
    col2im_add(dcol, stride, out_h, out_w, *dx);
  }
}

void relu_inplace(Tensor& x) {
  for (auto& v : x.v) v = v > 0.0 ? v : 0.0;
}

void relu_backward(const Tensor& y, Tensor& dy) {
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    if (y.v[i] <= 0.0) dy.v[i] = 0.0;
  }
}

Tensor upsample_bilinear(const Tensor& x, int factor) {
  const int out_h = x.height * factor;
  const int out_w = x.width * factor;
  Tensor y = Tensor::zeros(x.channels, out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = (oy + 0.5) / factor - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, x.height - 1);
    const int y1 = std::min(y0 + 1, x.height - 1);
    const double wy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = (ox + 0.5) / factor - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, x.width - 1);
      const int x1 = std::min(x0 + 1, x.width - 1);
      const double wx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
      for (int c = 0; c < x.channels; ++c) {
        y.at(c, oy, ox) = (1 - wy) * ((1 - wx) * x.at(c, y0, x0) + wx * x.at(c, y0, x1)) +
                          wy * ((1 - wx) * x.at(c, y1, x0) + wx * x.at(c, y1, x1));
      }
    }
  }
  return y;
}

void upsample_bilinear_backward(const Tensor& dy, int factor, int in_height, int in_width,
                                Tensor& dx) {
  dx = Tensor::zeros(dy.channels, in_height, in_width);
  for (int oy = 0; oy < dy.height; ++oy) {
    const double sy = (oy + 0.5) / factor - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, in_height - 1);
    const int y1 = std::min(y0 + 1, in_height - 1);
    const double wy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
    for (int ox = 0; ox < dy.width; ++ox) {
      const double sx = (ox + 0.5) / factor - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, in_width - 1);
      const int x1 = std::min(x0 + 1, in_width - 1);
      const double wx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
      for (int c = 0; c < dy.channels; ++c) {
        const double g = dy.at(c, oy, ox);
        dx.at(c, y0, x0) += (1 - wy) * (1 - wx) * g;
        dx.at(c, y0, x1) += (1 - wy) * wx * g;
        dx.at(c, y1, x0) += wy * (1 - wx) * g;
        dx.at(c, y1, x1) += wy * wx * g;
      }
    }
  }
}

}  // namespace smokeseg
