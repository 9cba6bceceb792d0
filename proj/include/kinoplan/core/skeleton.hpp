#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "kinoplan/core/rotation.hpp"

namespace kinoplan {

/// Canonical order of the five planned joints.
enum class KeyJoint : std::size_t { pelvis = 0, l_wrist, r_wrist, l_ankle, r_ankle };

inline constexpr std::size_t kKeyJointCount = 5;
inline constexpr std::array<std::string_view, kKeyJointCount> kKeyJointNames = {
    "pelvis", "l_wrist", "r_wrist", "l_ankle", "r_ankle"};

inline constexpr std::size_t kStandardJointCount = 22;

/// Joint hierarchy with rest offsets (meters, parent frame, Y-up).
///
/// Joints are stored in topological order: parent(i) < i for every non-root
/// joint and joint 0 is the root. `key_joints` lists the skeleton indices of
/// the planned joints in KeyJoint order; the standard human skeleton has all
/// five, reduced test skeletons may list fewer.
class Skeleton {
 public:
  Skeleton(std::vector<std::string> names, std::vector<int> parents, std::vector<Vec3> offsets,
           std::vector<std::size_t> key_joints);

  /// 22-joint body skeleton derived from the SMPL neutral rest pose.
  static Skeleton standard();

  /// Planar chain along +X with unit (or `link`) offsets; key joints are all
  /// chain joints. Used for analytic FK/IK checks.
  static Skeleton planar_chain(std::size_t joints = 3, double link = 1.0);

  std::size_t joint_count() const { return names_.size(); }
  std::size_t body_joint_count() const { return names_.size() - 1; }
  /// Scalars in a pose for this skeleton: root translation, root rotation,
  /// and one Euler triple per non-root joint.
  std::size_t pose_dimension() const { return 6 + 3 * body_joint_count(); }

  const std::string& name(std::size_t joint) const { return names_[joint]; }
  int parent(std::size_t joint) const { return parents_[joint]; }
  const Vec3& offset(std::size_t joint) const { return offsets_[joint]; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& parents() const { return parents_; }
  const std::vector<Vec3>& offsets() const { return offsets_; }
  const std::vector<std::size_t>& key_joints() const { return key_joints_; }
  std::size_t key_joint(KeyJoint k) const { return key_joints_.at(static_cast<std::size_t>(k)); }

  /// Throws ValidationError when the name is unknown.
  std::size_t index_of(std::string_view name) const;

  /// True for 22 joints with five distinct key joints.
  bool is_standard() const;

  bool operator==(const Skeleton&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<int> parents_;
  std::vector<Vec3> offsets_;
  std::vector<std::size_t> key_joints_;
};

}  // namespace kinoplan
