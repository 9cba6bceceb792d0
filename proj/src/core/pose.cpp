#include "kinoplan/core/pose.hpp"

#include <algorithm>
#include <cmath>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/kinematics.hpp"

namespace kinoplan {

Pose Pose::zero(const Skeleton& skeleton) { return zero(skeleton.body_joint_count()); }

Pose Pose::zero(std::size_t body_joints) {
  Pose p;
  p.body_rotations.assign(body_joints, Vec3::Zero());
  return p;
}

Pose Pose::from_vector(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() < 6 || (flat.size() - 6) % 3 != 0)
    throw ValidationError("pose vector length must be 6 + 3k, got " + std::to_string(flat.size()));
  Pose p;
  p.root_translation = flat.segment<3>(0);
  p.root_rotation = flat.segment<3>(3);
  const auto body = static_cast<std::size_t>((flat.size() - 6) / 3);
  p.body_rotations.resize(body);
  for (std::size_t j = 0; j < body; ++j)
    p.body_rotations[j] = flat.segment<3>(6 + 3 * static_cast<Eigen::Index>(j));
  return p;
}

Eigen::VectorXd Pose::to_vector() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dimension()));
  v.segment<3>(0) = root_translation;
  v.segment<3>(3) = root_rotation;
  for (std::size_t j = 0; j < body_rotations.size(); ++j)
    v.segment<3>(6 + 3 * static_cast<Eigen::Index>(j)) = body_rotations[j];
  return v;
}

bool Pose::all_finite() const {
  if (!root_translation.allFinite() || !root_rotation.allFinite()) return false;
  return std::all_of(body_rotations.begin(), body_rotations.end(),
                     [](const Vec3& r) { return r.allFinite(); });
}

void check_pose(const Skeleton& skeleton, const Pose& pose) {
  if (pose.body_rotations.size() != skeleton.body_joint_count())
    throw ValidationError("pose has " + std::to_string(pose.body_rotations.size()) +
                          " body rotations, skeleton expects " +
                          std::to_string(skeleton.body_joint_count()));
  if (!pose.all_finite()) throw ValidationError("pose contains non-finite values");
}

Eigen::MatrixXd Motion::to_matrix() const {
  if (frames.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(frames.front().dimension());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(frames.size()), dim);
  for (std::size_t i = 0; i < frames.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = frames[i].to_vector().transpose();
  return m;
}

Motion Motion::from_matrix(const Eigen::Ref<const Eigen::MatrixXd>& rows, double fps) {
  Motion m;
  m.fps = fps;
  m.frames.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    m.frames.push_back(Pose::from_vector(rows.row(i).transpose()));
  return m;
}

void check_motion(const Skeleton& skeleton, const Motion& motion) {
  if (motion.frames.empty()) throw ValidationError("motion has no frames");
  if (!(motion.fps > 0.0) || !std::isfinite(motion.fps))
    throw ValidationError("motion fps must be positive");
  for (const auto& f : motion.frames) check_pose(skeleton, f);
}

bool Keyframe::all_finite() const {
  return std::all_of(positions.begin(), positions.end(), [](const Vec3& p) { return p.allFinite(); });
}

double Keyframe::max_abs_coordinate() const {
  double m = 0.0;
  for (const auto& p : positions) m = std::max(m, p.cwiseAbs().maxCoeff());
  return m;
}

KeyframePlan plan_to_absolute(const KeyframePlan& plan, const std::optional<Keyframe>& initial) {
  if (initial && initial->mode != KeyframeMode::absolute)
    throw ValidationError("initial keyframe must be absolute");
  KeyframePlan out = plan;
  std::optional<Keyframe> previous = initial;
  for (auto& frame : out.frames) {
    if (frame.mode == KeyframeMode::delta) {
      if (!previous) throw ValidationError("delta keyframe has no predecessor and no initial keyframe");
      for (std::size_t k = 0; k < kKeyJointCount; ++k) frame.positions[k] += previous->positions[k];
      frame.mode = KeyframeMode::absolute;
    }
    if (!frame.all_finite()) throw ValidationError("keyframe plan contains non-finite positions");
    previous = frame;
  }
  return out;
}

KeyframePlan plan_to_delta(const KeyframePlan& plan, const Keyframe& initial) {
  const KeyframePlan absolute = plan_to_absolute(plan, initial);
  KeyframePlan out = absolute;
  const Keyframe* previous = &initial;
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    for (std::size_t k = 0; k < kKeyJointCount; ++k)
      out.frames[i].positions[k] = absolute.frames[i].positions[k] - previous->positions[k];
    out.frames[i].mode = KeyframeMode::delta;
    previous = &absolute.frames[i];
  }
  return out;
}

Pose standing_pose(const Skeleton& skeleton, double ground_height, double clearance) {
  Pose pose = Pose::zero(skeleton);
  const auto rest = forward_kinematics(skeleton, pose);
  double lowest = rest.front().y();
  for (const auto& p : rest) lowest = std::min(lowest, p.y());
  pose.root_translation = Vec3(0.0, ground_height + clearance - lowest, 0.0);
  return pose;
}

Keyframe standing_keyframe(const Skeleton& skeleton, double ground_height, double clearance) {
  return extract_key_positions(skeleton, standing_pose(skeleton, ground_height, clearance));
}

}  // namespace kinoplan
