#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <opencv2/core.hpp>

namespace smokeseg {

// Row-major H x W grid of doubles. Holds logits or probabilities.
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<double> v;

  static Grid zeros(int height, int width) {
    return Grid{height, width, std::vector<double>(static_cast<std::size_t>(height) * width, 0.0)};
  }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return v.size(); }
};

// C x H x W tensor of doubles, channel planes contiguous.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> v;

  static Tensor zeros(int channels, int height, int width) {
    return Tensor{channels, height, width,
                  std::vector<double>(static_cast<std::size_t>(channels) * height * width, 0.0)};
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double at(int c, int y, int x) const {
    return v[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
  double& at(int c, int y, int x) {
    return v[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
};

// 8-bit 3-channel image to 3 x H x W tensor, values scaled to [-0.5, 0.5].
// Channel order follows the cv::Mat input.
Tensor image_to_tensor(const cv::Mat& image);

Grid sigmoid(const Grid& logits);
Grid resize_bilinear(const Grid& src, int out_height, int out_width);

// 3x3 convolution, padding 1. Weights laid out [out_c][in_c][ky][kx],
// one bias per output channel. Output dims: (d - 1) / stride + 1.
void conv3x3_forward(const Tensor& x, std::span<const double> weights,
                     std::span<const double> bias, int out_channels, int stride, Tensor& y);

// Accumulates into dweights/dbias; writes dx when non-null (overwrites).
void conv3x3_backward(const Tensor& x, std::span<const double> weights, int out_channels,
                      int stride, const Tensor& dy, Tensor* dx, std::span<double> dweights,
                      std::span<double> dbias);

void relu_inplace(Tensor& x);
// Zeroes gradient entries where the forward output was clipped.
void relu_backward(const Tensor& y, Tensor& dy);

// align_corners = false sampling; edge pixels clamp.
Tensor upsample_bilinear(const Tensor& x, int factor);
void upsample_bilinear_backward(const Tensor& dy, int factor, int in_height, int in_width,
                                Tensor& dx);

}  // namespace smokeseg
