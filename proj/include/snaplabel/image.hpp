#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "snaplabel/geometry.hpp"

namespace snaplabel {

/// Row-major 8-bit RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {0, 0, 0});

  Rgb at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(std::size_t pixel, Rgb c) {
    data[3 * pixel] = c[0];
    data[3 * pixel + 1] = c[1];
    data[3 * pixel + 2] = c[2];
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Row-major camera-frame depths in meters; +Inf where nothing was drawn.
struct DepthMap {
  static constexpr float kEmpty = std::numeric_limits<float>::infinity();

  int width = 0;
  int height = 0;
  std::vector<float> data;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, kEmpty) {}
  friend bool operator==(const DepthMap&, const DepthMap&) = default;
};

/// Row-major 16-bit single-channel image.
struct Gray16Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;
};

std::string encode_png(const RgbImage& image);
RgbImage decode_png(const std::string& bytes);
void save_png(const RgbImage& image, const std::filesystem::path& path);
RgbImage load_png(const std::filesystem::path& path);
void save_png16(const Gray16Image& image, const std::filesystem::path& path);
Gray16Image load_png16(const std::filesystem::path& path);

/// Depth grid: "DPTH", u32 width, u32 height, u32 reserved, then
/// width×height little-endian float32 values.
std::string encode_depth(const DepthMap& depth);
DepthMap decode_depth(const std::string& bytes);
void save_depth(const DepthMap& depth, const std::filesystem::path& path);
DepthMap load_depth(const std::filesystem::path& path);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

}  // namespace snaplabel
