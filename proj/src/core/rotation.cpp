#include "kinoplan/core/rotation.hpp"

#include <cmath>
#include <numbers>

namespace kinoplan {

namespace {

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 drot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

Mat3 drot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}

Mat3 drot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

double unwrap_toward(double angle, double reference) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return angle + two_pi * std::round((reference - angle) / two_pi);
}

}  // namespace

Mat3 euler_xyz_to_matrix(const Vec3& angles) {
  return rot_x(angles.x()) * rot_y(angles.y()) * rot_z(angles.z());
}

std::array<Mat3, 3> euler_xyz_derivatives(const Vec3& angles) {
  const Mat3 rx = rot_x(angles.x()), ry = rot_y(angles.y()), rz = rot_z(angles.z());
  return {drot_x(angles.x()) * ry * rz, rx * drot_y(angles.y()) * rz,
          rx * ry * drot_z(angles.z())};
}

Vec3 matrix_to_euler_xyz(const Mat3& r) {
  const double cos_b = std::hypot(r(0, 0), r(0, 1));
  const double b = std::atan2(r(0, 2), cos_b);
  if (cos_b > 1e-12) {
    return {std::atan2(-r(1, 2), r(2, 2)), b, std::atan2(-r(0, 1), r(0, 0))};
  }
  // gimbal lock: only a +/- c is observable, put it all in a
  const double a = r(0, 2) > 0 ? std::atan2(r(1, 0), r(1, 1)) : std::atan2(-r(1, 0), r(1, 1));
  return {a, b, 0.0};
}

Eigen::Quaterniond euler_xyz_to_quaternion(const Vec3& angles) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angles.x(), Vec3::UnitX()) *
                            Eigen::AngleAxisd(angles.y(), Vec3::UnitY()) *
                            Eigen::AngleAxisd(angles.z(), Vec3::UnitZ()));
}

Vec3 slerp_euler_xyz(const Vec3& from, const Vec3& to, double t) {
  if (t <= 0.0 || from == to) return from;
  if (t >= 1.0) return to;
  const Eigen::Quaterniond qa = euler_xyz_to_quaternion(from);
  const Eigen::Quaterniond qb = euler_xyz_to_quaternion(to);
  Vec3 out = matrix_to_euler_xyz(qa.slerp(t, qb).toRotationMatrix());
  const Vec3 blend = (1.0 - t) * from + t * to;
  for (int k = 0; k < 3; ++k) out[k] = unwrap_toward(out[k], blend[k]);
  return out;
}

double heading_yaw(const Mat3& rotation) {
  const Vec3 forward = rotation * Vec3::UnitZ();
  return std::atan2(forward.x(), forward.z());
}

double wrap_angle(double angle) {
  return std::remainder(angle, 2.0 * std::numbers::pi);
}

}  // namespace kinoplan
