#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cresmd/tensor.hpp"

namespace cresmd {

// Planar float image, channels x height x width, nominal range [0,1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  static Image zeros(int channels, int height, int width);
  static Image filled(int channels, int height, int width, float value);

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }
  float& at(int c, int y, int x) { return data[(c * plane()) + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[(c * plane()) + static_cast<std::size_t>(y) * width + x];
  }
  bool same_dims(const Image& other) const {
    return channels == other.channels && height == other.height && width == other.width;
  }

  bool operator==(const Image&) const = default;
};

// Round-half-away-from-zero of clamp(v,0,1)*255.
std::uint8_t quantize_u8(float value);

// Interleaved 8-bit pixels (row-major, channel fastest) <-> planar floats.
std::vector<std::uint8_t> to_interleaved_u8(const Image& image);
Image from_interleaved_u8(std::span<const std::uint8_t> pixels, int channels, int height, int width);

// Snap every value onto the 8-bit grid.
Image quantize_image(const Image& image);
Image clamp_image(const Image& image);

// P6 (RGB) / P5 (gray) binary, maxval 255. Comments in the header are
// accepted on read.
Image load_ppm(const std::filesystem::path& path);
void save_ppm(const Image& image, const std::filesystem::path& path);
Image decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const Image& image);

template <typename T>
Tensor<T> image_to_tensor(const Image& image) {
  std::vector<T> values(image.data.begin(), image.data.end());
  return Tensor<T>::from({static_cast<std::size_t>(image.channels),
                          static_cast<std::size_t>(image.height),
                          static_cast<std::size_t>(image.width)},
                         std::move(values));
}

// No clamping: the graph output is exported as-is and clamped at save time.
template <typename T>
Image tensor_to_image(const Tensor<T>& tensor) {
  Image image;
  image.channels = static_cast<int>(tensor.dim(0));
  image.height = static_cast<int>(tensor.dim(1));
  image.width = static_cast<int>(tensor.dim(2));
  image.data.assign(tensor.data().begin(), tensor.data().end());
  return image;
}

}  // namespace cresmd
