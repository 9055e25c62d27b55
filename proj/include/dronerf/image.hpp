#pragma once

#include <cassert>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace dronerf {

// Row-major image with interleaved channels. Pixel (x, y) covers the
// continuous square [x, x+1) x [y, y+1); its center sits at (x+0.5, y+0.5).
template <typename T, int Channels>
class Image {
 public:
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * height * Channels, fill) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("image dimensions must be positive");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t pixel_count() const { return static_cast<size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y, int c = 0) {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[(static_cast<size_t>(y) * width_ + x) * Channels + c];
  }
  const T& operator()(int x, int y, int c = 0) const {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[(static_cast<size_t>(y) * width_ + x) * Channels + c];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Intensities normalized to [0, 1].
using GrayImage = Image<float, 1>;
using RgbImage = Image<float, 3>;

GrayImage to_gray(const RgbImage& rgb);

// 8-bit PNG I/O; values are clamped to [0, 1] and rounded on write.
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_png_rgb(const std::filesystem::path& path);

}  // namespace dronerf
