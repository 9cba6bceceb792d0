#include "kinoplan/core/kinematics.hpp"

#include "kinoplan/core/error.hpp"

namespace kinoplan {

JointFrames forward_kinematics_frames(const Skeleton& skeleton, const Pose& pose) {
  const std::size_t n = skeleton.joint_count();
  JointFrames out;
  out.rotations.resize(n);
  out.positions.resize(n);
  out.rotations[0] = euler_xyz_to_matrix(pose.root_rotation);
  out.positions[0] = pose.root_translation;
  for (std::size_t j = 1; j < n; ++j) {
    const auto p = static_cast<std::size_t>(skeleton.parent(j));
    out.positions[j] = out.positions[p] + out.rotations[p] * skeleton.offset(j);
    out.rotations[j] = out.rotations[p] * euler_xyz_to_matrix(pose.body_rotations[j - 1]);
  }
  return out;
}

std::vector<Vec3> forward_kinematics(const Skeleton& skeleton, const Pose& pose) {
  return forward_kinematics_frames(skeleton, pose).positions;
}

Keyframe extract_key_positions(const Skeleton& skeleton, const Pose& pose) {
  const auto positions = forward_kinematics(skeleton, pose);
  Keyframe key;
  const auto& keys = skeleton.key_joints();
  for (std::size_t k = 0; k < keys.size(); ++k) key.positions[k] = positions[keys[k]];
  return key;
}

bool is_ancestor(const Skeleton& skeleton, std::size_t ancestor, std::size_t joint) {
  for (int j = static_cast<int>(joint); j >= 0; j = skeleton.parent(static_cast<std::size_t>(j)))
    if (static_cast<std::size_t>(j) == ancestor) return true;
  return false;
}

Eigen::MatrixXd position_jacobian(const Skeleton& skeleton, const Pose& pose,
                                  const std::vector<std::size_t>& joints) {
  const JointFrames frames = forward_kinematics_frames(skeleton, pose);
  const std::size_t n = skeleton.joint_count();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * static_cast<Eigen::Index>(joints.size()),
                                              static_cast<Eigen::Index>(pose.dimension()));

  // Rotating joint a by dR_a moves every descendant k by
  // G_parent(a) * dR_a * R_a^T * G_parent(a)^T * (x_k - x_a).
  std::vector<std::array<Mat3, 3>> lever(n);
  for (std::size_t a = 0; a < n; ++a) {
    const Vec3& angles = pose.joint_rotation(a);
    const Mat3 local = euler_xyz_to_matrix(angles);
    const Mat3 parent_rot = a == 0 ? Mat3::Identity() : frames.rotations[static_cast<std::size_t>(skeleton.parent(a))];
    const auto d = euler_xyz_derivatives(angles);
    for (int c = 0; c < 3; ++c) lever[a][c] = parent_rot * d[c] * local.transpose() * parent_rot.transpose();
  }

  for (std::size_t r = 0; r < joints.size(); ++r) {
    const std::size_t k = joints[r];
    const auto row = 3 * static_cast<Eigen::Index>(r);
    jac.block<3, 3>(row, 0).setIdentity();
    for (std::size_t a = 0; a < n; ++a) {
      if (!is_ancestor(skeleton, a, k)) continue;
      const Vec3 arm = frames.positions[k] - frames.positions[a];
      const Eigen::Index col = a == 0 ? 3 : static_cast<Eigen::Index>(6 + 3 * (a - 1));
      for (int c = 0; c < 3; ++c) jac.block<3, 1>(row, col + c) = lever[a][c] * arm;
    }
  }
  return jac;
}

}  // namespace kinoplan
