#include "kinoplan/core/features.hpp"

#include <cmath>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/core/rotation.hpp"
#include "kinoplan/kernels/kernels.hpp"
#include "kinoplan/physics/physics.hpp"

namespace kinoplan {

namespace {

Mat3 yaw_matrix(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
}

}  // namespace

std::vector<FeatureVector263> to_feature_263(const Skeleton& skeleton, const Motion& motion,
                                             double ground_height) {
  if (!skeleton.is_standard()) throw ValidationError("263-dim features need the standard skeleton");
  if (motion.length() < 2) throw ValidationError("263-dim features need at least two frames");
  check_motion(skeleton, motion);

  const std::size_t frames = motion.length();
  std::vector<JointFrames> fk(frames);
  for (std::size_t f = 0; f < frames; ++f) fk[f] = forward_kinematics_frames(skeleton, motion.frames[f]);

  std::vector<std::vector<Vec3>> positions(frames);
  for (std::size_t f = 0; f < frames; ++f) positions[f] = fk[f].positions;
  const auto proxy = physics::SurfaceProxy::standard(skeleton, ground_height);
  const std::vector<std::size_t> contact_joints = {
      skeleton.index_of("left_ankle"), skeleton.index_of("left_foot"),
      skeleton.index_of("right_ankle"), skeleton.index_of("right_foot")};
  const auto contacts = physics::joint_contacts(positions, contact_joints, proxy);

  std::vector<FeatureVector263> out(frames - 1);
  for (std::size_t f = 0; f + 1 < frames; ++f) {
    auto& v = out[f].values;
    const double yaw = heading_yaw(fk[f].rotations[0]);
    const double yaw_next = heading_yaw(fk[f + 1].rotations[0]);
    const Mat3 to_heading = yaw_matrix(-yaw);
    const Vec3& root = positions[f][0];

    v[FeatureVector263::kRootAngularVelocity] = wrap_angle(yaw_next - yaw);
    const Vec3 root_velocity = to_heading * (positions[f + 1][0] - root);
    v[FeatureVector263::kRootLinearVelocity] = root_velocity.x();
    v[FeatureVector263::kRootLinearVelocity + 1] = root_velocity.z();
    v[FeatureVector263::kRootHeight] = root.y() - ground_height;

    for (std::size_t j = 1; j < skeleton.joint_count(); ++j) {
      Vec3 rel = positions[f][j] - Vec3(root.x(), 0.0, root.z());
      rel = to_heading * rel;
      rel.y() -= ground_height;
      for (int c = 0; c < 3; ++c) v[FeatureVector263::kRicPositions + 3 * (j - 1) + c] = rel[c];

      const Mat3 local = euler_xyz_to_matrix(motion.frames[f].body_rotations[j - 1]);
      const std::size_t base = FeatureVector263::kRotations6d + 6 * (j - 1);
      for (int r = 0; r < 3; ++r) {
        v[base + 2 * r] = local(r, 0);
        v[base + 2 * r + 1] = local(r, 1);
      }
    }
    for (std::size_t j = 0; j < skeleton.joint_count(); ++j) {
      const Vec3 vel = to_heading * (positions[f + 1][j] - positions[f][j]);
      for (int c = 0; c < 3; ++c) v[FeatureVector263::kJointVelocities + 3 * j + c] = vel[c];
    }
    for (std::size_t c = 0; c < 4; ++c) v[FeatureVector263::kFootContacts + c] = contacts[f][c];
  }
  return out;
}

}  // namespace kinoplan
