#include "kinoplan/core/render.hpp"

#include <png.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/kinematics.hpp"

namespace kinoplan {

namespace {

using Color = std::array<std::uint8_t, 3>;

constexpr Color kCenterColor = {20, 20, 20};
constexpr Color kLeftColor = {30, 80, 200};
constexpr Color kRightColor = {200, 40, 40};
constexpr Color kGroundColor = {160, 160, 160};

void stamp(Image& img, int cx, int cy, int stroke, const Color& color) {
  const int lo = -(stroke - 1) / 2;
  const int hi = stroke / 2;
  for (int dy = lo; dy <= hi; ++dy) {
    for (int dx = lo; dx <= hi; ++dx) {
      const int x = cx + dx, y = cy + dy;
      if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
      std::memcpy(img.pixel(x, y), color.data(), 3);
    }
  }
}

void draw_segment(Image& img, const Eigen::Vector2d& a, const Eigen::Vector2d& b, int stroke,
                  const Color& color) {
  const double length = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(length * 4.0)));
  for (int s = 0; s <= steps; ++s) {
    const Eigen::Vector2d p = a + (b - a) * (static_cast<double>(s) / steps);
    if (!p.allFinite() || std::abs(p.x()) > 1e6 || std::abs(p.y()) > 1e6) return;
    stamp(img, static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y())), stroke, color);
  }
}

Color joint_color(const std::string& name) {
  if (name.rfind("left", 0) == 0) return kLeftColor;
  if (name.rfind("right", 0) == 0) return kRightColor;
  return kCenterColor;
}

}  // namespace

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

Eigen::Vector2d OrthoCamera::project(const Vec3& world) const {
  return {width / 2.0 + (world.x() - center_x) * pixels_per_meter,
          height / 2.0 - (world.y() - center_y) * pixels_per_meter};
}

int OrthoCamera::ground_row() const {
  return static_cast<int>(std::lround(project(Vec3(center_x, ground_height, 0.0)).y()));
}

Image render_frame(const Skeleton& skeleton, const Pose& pose, const OrthoCamera& camera) {
  check_pose(skeleton, pose);
  Image img(camera.width, camera.height, 255);
  const int ground = camera.ground_row();
  if (ground >= 0 && ground < img.height)
    for (int x = 0; x < img.width; ++x) std::memcpy(img.pixel(x, ground), kGroundColor.data(), 3);

  const auto positions = forward_kinematics(skeleton, pose);
  for (std::size_t j = 1; j < skeleton.joint_count(); ++j) {
    const auto p = static_cast<std::size_t>(skeleton.parent(j));
    draw_segment(img, camera.project(positions[p]), camera.project(positions[j]), camera.stroke,
                 joint_color(skeleton.name(j)));
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.rgb.data(), 0, nullptr))
    throw FormatError(std::string("png sizing failed: ") + png.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.rgb.data(), 0, nullptr))
    throw FormatError(std::string("png encoding failed: ") + png.message);
  out.resize(size);
  return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw FormatError(std::string("png header invalid: ") + png.message);
  png.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.rgb.data(), 0, nullptr)) {
    png_image_free(&png);
    throw FormatError(std::string("png decoding failed: ") + png.message);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace kinoplan
