#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kinoplan/core/pose.hpp"

namespace kinoplan {

/// 8-bit RGB raster, row-major, top row first.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 255);

  std::uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  bool operator==(const Image&) const = default;
};

/// Orthographic camera on the +Z axis looking toward -Z: image x follows
/// world X, image y follows world -Y. The camera does not track the figure.
struct OrthoCamera {
  int width = 224;
  int height = 224;
  double center_x = 0.0;   // world X at the image center
  double center_y = 0.9;   // world Y at the image center
  double pixels_per_meter = 224.0 / 2.4;
  double ground_height = 0.0;
  int stroke = 3;  // line width in pixels

  /// Continuous pixel coordinates of a world point.
  Eigen::Vector2d project(const Vec3& world) const;
  /// Pixel row of the ground line.
  int ground_row() const;
};

/// Stick figure (segments between each joint and its parent) over a white
/// background with a gray ground line. Pure function of its inputs.
Image render_frame(const Skeleton& skeleton, const Pose& pose, const OrthoCamera& camera = {});

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(const std::vector<std::uint8_t>& bytes);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace kinoplan
