#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinoplan/core/rotation.hpp"
#include "kinoplan/core/skeleton.hpp"

namespace kinoplan {

/// Full-body pose: root translation (meters), root rotation and one Euler
/// triple (radians, intrinsic XYZ) per non-root joint.
///
/// Flat layout used everywhere a pose is treated as a vector:
/// [translation(3), root rotation(3), body rotations(3 * (J-1))]. For the
/// standard skeleton that is 69 scalars.
struct Pose {
  Vec3 root_translation = Vec3::Zero();
  Vec3 root_rotation = Vec3::Zero();
  std::vector<Vec3> body_rotations;

  /// Zero pose for a skeleton: identity rotations, zero translation.
  static Pose zero(const Skeleton& skeleton);
  static Pose zero(std::size_t body_joints);
  static Pose from_vector(const Eigen::Ref<const Eigen::VectorXd>& flat);

  std::size_t dimension() const { return 6 + 3 * body_rotations.size(); }
  Eigen::VectorXd to_vector() const;
  bool all_finite() const;
  /// Local rotation of a joint; joint 0 is the root.
  const Vec3& joint_rotation(std::size_t joint) const {
    return joint == 0 ? root_rotation : body_rotations[joint - 1];
  }

  bool operator==(const Pose&) const = default;
};

/// Throws ValidationError if the pose does not fit the skeleton.
void check_pose(const Skeleton& skeleton, const Pose& pose);

struct Motion {
  std::vector<Pose> frames;
  double fps = 20.0;

  std::size_t length() const { return frames.size(); }
  /// Frames stacked row-wise, one pose vector per row.
  Eigen::MatrixXd to_matrix() const;
  static Motion from_matrix(const Eigen::Ref<const Eigen::MatrixXd>& rows, double fps);

  bool operator==(const Motion&) const = default;
};

/// Throws ValidationError on empty motions, mixed pose sizes or bad fps.
void check_motion(const Skeleton& skeleton, const Motion& motion);

enum class KeyframeMode { absolute, delta };

/// Positions of the five key joints, in KeyJoint order.
struct Keyframe {
  std::array<Vec3, kKeyJointCount> positions{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
                                             Vec3::Zero(), Vec3::Zero()};
  KeyframeMode mode = KeyframeMode::absolute;

  Vec3& operator[](KeyJoint k) { return positions[static_cast<std::size_t>(k)]; }
  const Vec3& operator[](KeyJoint k) const { return positions[static_cast<std::size_t>(k)]; }
  bool all_finite() const;
  double max_abs_coordinate() const;

  bool operator==(const Keyframe&) const = default;
};

struct KeyframePlan {
  std::vector<Keyframe> frames;
  std::string prompt;
  int segment_length = 2;

  std::size_t length() const { return frames.size(); }
  bool operator==(const KeyframePlan&) const = default;
};

/// Cumulative sum of delta frames starting from `initial`; absolute frames
/// reset the running position. ValidationError if a delta frame has no
/// predecessor and no initial frame is supplied.
KeyframePlan plan_to_absolute(const KeyframePlan& plan, const std::optional<Keyframe>& initial);

/// Inverse of plan_to_absolute: every frame becomes its displacement from the
/// previous one (the first from `initial`).
KeyframePlan plan_to_delta(const KeyframePlan& plan, const Keyframe& initial);

/// Zero pose lifted so the lowest joint sits `clearance` above the ground.
/// The default clearance equals the default foot radius of the surface proxy,
/// so the standing figure neither floats nor penetrates.
Pose standing_pose(const Skeleton& skeleton, double ground_height = 0.0, double clearance = 0.02);

/// Key positions of standing_pose; the default initial keyframe for planning.
Keyframe standing_keyframe(const Skeleton& skeleton, double ground_height = 0.0,
                           double clearance = 0.02);

}  // namespace kinoplan
