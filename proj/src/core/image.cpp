#include "dronerf/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

namespace dronerf {

GrayImage to_gray(const RgbImage& rgb) {
  GrayImage out(rgb.width(), rgb.height());
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      out(x, y) = 0.2126f * rgb(x, y, 0) + 0.7152f * rgb(x, y, 1) + 0.0722f * rgb(x, y, 2);
    }
  }
  return out;
}

namespace {

uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

template <int C>
void write_png_impl(const std::filesystem::path& path, const Image<float, C>& img) {
  std::vector<uint8_t> bytes(img.data().size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), quantize);

  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width());
  desc.height = static_cast<png_uint_32>(img.height());
  desc.format = C == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&desc, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw std::runtime_error("failed to write PNG " + path.string() + ": " + desc.message);
  }
}

}  // namespace

void write_png(const std::filesystem::path& path, const GrayImage& img) { write_png_impl(path, img); }
void write_png(const std::filesystem::path& path, const RgbImage& img) { write_png_impl(path, img); }

RgbImage read_png_rgb(const std::filesystem::path& path) {
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.c_str())) {
    throw std::runtime_error("failed to open PNG " + path.string() + ": " + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> bytes(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&desc);
    throw std::runtime_error("failed to decode PNG " + path.string() + ": " + desc.message);
  }
  RgbImage img(static_cast<int>(desc.width), static_cast<int>(desc.height));
  auto px = img.data();
  for (size_t i = 0; i < bytes.size(); ++i) px[i] = bytes[i] / 255.0f;
  return img;
}

}  // namespace dronerf
