#pragma once

#include <array>
#include <span>
#include <vector>

#include "kinoplan/core/pose.hpp"

namespace kinoplan {

/// 263-scalar per-frame encoding of a standard-skeleton motion.
///
/// Layout (offsets are constants below):
///   [0]        root angular velocity about +Y (rad/frame)
///   [1,3)      root linear velocity in X/Z, expressed in the root heading frame
///   [3]        root height above the ground plane
///   [4,67)     21 non-root joint positions, root-relative in X/Z, heading-normalized
///   [67,193)   21 local joint rotations as 6D (first two matrix columns, row-major)
///   [193,259)  22 joint velocities in the root heading frame
///   [259,263)  contacts for left ankle, left foot, right ankle, right foot
struct FeatureVector263 {
  static constexpr std::size_t kDim = 263;
  static constexpr std::size_t kRootAngularVelocity = 0;
  static constexpr std::size_t kRootLinearVelocity = 1;
  static constexpr std::size_t kRootHeight = 3;
  static constexpr std::size_t kRicPositions = 4;
  static constexpr std::size_t kRotations6d = 67;
  static constexpr std::size_t kJointVelocities = 193;
  static constexpr std::size_t kFootContacts = 259;

  std::array<double, kDim> values{};

  std::span<const double> ric_positions() const { return {values.data() + kRicPositions, 63}; }
  std::span<const double> rotations_6d() const { return {values.data() + kRotations6d, 126}; }
  std::span<const double> joint_velocities() const { return {values.data() + kJointVelocities, 66}; }
  std::span<const double> foot_contacts() const { return {values.data() + kFootContacts, 4}; }
};

/// Encodes frames 0..L-2 (velocities look one frame ahead). Requires the
/// standard skeleton and L >= 2. Contacts use the thresholds of
/// physics derive_contacts applied to ankles and feet.
std::vector<FeatureVector263> to_feature_263(const Skeleton& skeleton, const Motion& motion,
                                             double ground_height = 0.0);

}  // namespace kinoplan
