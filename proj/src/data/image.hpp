#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace e2i::data {

// Interleaved HWC raster with values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<double> pixels;

  static Image blank(int h, int w, int c = 3, double fill = 0.0);
  double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

// PNG, JPEG, or binary PPM, chosen by file extension.
Image read_image(const std::string& path);
// 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
void write_png(const std::string& path, const Image& img);

Image resize_bilinear(const Image& img, int height, int width);
// Channel-first tensor [C, H, W].
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);
// Rounds through 8 bits per channel, as a PNG round trip would.
Image quantize8(const Image& img);

}  // namespace e2i::data
