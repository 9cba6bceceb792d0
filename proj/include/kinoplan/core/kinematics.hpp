#pragma once

#include <vector>

#include "kinoplan/core/pose.hpp"
#include "kinoplan/core/skeleton.hpp"

namespace kinoplan {

/// World-frame rotation and position of every joint.
struct JointFrames {
  std::vector<Mat3> rotations;
  std::vector<Vec3> positions;
};

/// G_j = G_parent * R_j and x_j = x_parent + G_parent * offset_j, with the
/// root placed at the pose's root translation.
JointFrames forward_kinematics_frames(const Skeleton& skeleton, const Pose& pose);

std::vector<Vec3> forward_kinematics(const Skeleton& skeleton, const Pose& pose);

/// FK masked to the skeleton's key joints, in KeyJoint order. Reduced
/// skeletons with fewer key joints leave the remaining slots at zero.
Keyframe extract_key_positions(const Skeleton& skeleton, const Pose& pose);

/// Derivatives of the selected joints' world positions with respect to the
/// flat pose vector: one 3 x pose_dimension block per selected joint, stacked
/// into a (3 * joints.size()) x pose_dimension matrix.
Eigen::MatrixXd position_jacobian(const Skeleton& skeleton, const Pose& pose,
                                  const std::vector<std::size_t>& joints);

/// Ancestor test in the topological order: true if `ancestor` lies on the
/// chain from `joint` to the root (a joint is its own ancestor).
bool is_ancestor(const Skeleton& skeleton, std::size_t ancestor, std::size_t joint);

}  // namespace kinoplan
