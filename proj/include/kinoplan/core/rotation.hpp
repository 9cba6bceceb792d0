#pragma once

// Rotation helpers. Every Euler triple in this project is intrinsic XYZ:
// R = Rx(a) * Ry(b) * Rz(c).

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>

namespace kinoplan {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

Mat3 euler_xyz_to_matrix(const Vec3& angles);

/// Partial derivatives of euler_xyz_to_matrix with respect to each angle.
std::array<Mat3, 3> euler_xyz_derivatives(const Vec3& angles);

/// Inverse of euler_xyz_to_matrix with the middle angle in [-pi/2, pi/2].
Vec3 matrix_to_euler_xyz(const Mat3& rotation);

Eigen::Quaterniond euler_xyz_to_quaternion(const Vec3& angles);

/// Slerp between two Euler triples; the result is unwrapped by multiples of
/// 2*pi toward the linear blend of the inputs so sequences stay continuous.
Vec3 slerp_euler_xyz(const Vec3& from, const Vec3& to, double t);

/// Heading angle about +Y of a rotation: atan2 of the rotated +Z axis.
double heading_yaw(const Mat3& rotation);

double wrap_angle(double angle);

}  // namespace kinoplan
