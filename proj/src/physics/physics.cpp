#include "kinoplan/physics/physics.hpp"

#include <algorithm>
#include <cmath>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/kernels/kernels.hpp"

namespace kinoplan::physics {

namespace {

constexpr double kMetersToMillimeters = 1000.0;

std::array<std::size_t, 2> ankle_joints(const Skeleton& skeleton) {
  if (!skeleton.is_standard())
    throw ValidationError("foot contacts need the standard skeleton (ankle key joints)");
  return {skeleton.key_joint(KeyJoint::l_ankle), skeleton.key_joint(KeyJoint::r_ankle)};
}

void require_frames(const Motion& motion, std::size_t minimum) {
  if (motion.length() < minimum)
    throw ValidationError("motion needs at least " + std::to_string(minimum) + " frame(s)");
}

}  // namespace

SurfaceProxy SurfaceProxy::standard(const Skeleton& skeleton, double ground_height) {
  SurfaceProxy proxy = points(skeleton, ground_height);
  if (skeleton.is_standard()) {
    // ankle centers sit about 8 cm above the sole, toe joints about 2 cm
    for (const char* name : {"left_ankle", "right_ankle"}) proxy.radii[skeleton.index_of(name)] = 0.08;
    for (const char* name : {"left_foot", "right_foot"}) proxy.radii[skeleton.index_of(name)] = 0.02;
  }
  return proxy;
}

SurfaceProxy SurfaceProxy::points(const Skeleton& skeleton, double ground_height) {
  return SurfaceProxy{std::vector<double>(skeleton.joint_count(), 0.0), ground_height};
}

void SurfaceProxy::validate(const Skeleton& skeleton) const {
  if (radii.size() != skeleton.joint_count())
    throw ValidationError("surface proxy needs one radius per joint");
  for (double r : radii)
    if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("surface proxy radii must be >= 0");
  if (!std::isfinite(ground_height)) throw ValidationError("ground height must be finite");
}

double lowest_point(const Skeleton& skeleton, const Pose& pose, const SurfaceProxy& proxy) {
  proxy.validate(skeleton);
  const auto positions = forward_kinematics(skeleton, pose);
  double lowest = positions[0].y() - proxy.radii[0];
  for (std::size_t j = 1; j < positions.size(); ++j)
    lowest = std::min(lowest, positions[j].y() - proxy.radii[j]);
  return lowest;
}

std::vector<double> lowest_points(const Skeleton& skeleton, const Motion& motion,
                                  const SurfaceProxy& proxy) {
  proxy.validate(skeleton);
  const auto positions = kernels::parallel::batch_forward_kinematics(skeleton, motion.frames);
  std::vector<double> out(positions.size());
  for (std::size_t f = 0; f < positions.size(); ++f) {
    double lowest = positions[f][0].y() - proxy.radii[0];
    for (std::size_t j = 1; j < positions[f].size(); ++j)
      lowest = std::min(lowest, positions[f][j].y() - proxy.radii[j]);
    out[f] = lowest;
  }
  return out;
}

std::vector<std::vector<int>> joint_contacts(const std::vector<std::vector<Vec3>>& positions,
                                             const std::vector<std::size_t>& joints,
                                             const SurfaceProxy& proxy,
                                             const ContactThresholds& thresholds) {
  const std::size_t frames = positions.size();
  if (frames < 2) throw ValidationError("contact derivation needs at least two frames");
  std::vector<std::vector<int>> out(frames, std::vector<int>(joints.size(), 0));
  for (std::size_t k = 0; k < joints.size(); ++k) {
    const std::size_t j = joints[k];
    for (std::size_t f = 0; f < frames; ++f) {
      const bool low = positions[f][j].y() - proxy.radii[j] <= proxy.ground_height + thresholds.height;
      const std::size_t s = f == 0 ? 1 : f;
      const bool slow = (positions[s][j] - positions[s - 1][j]).norm() <= thresholds.speed;
      out[f][k] = low && slow ? 1 : 0;
    }
  }
  return out;
}

ContactLabels derive_contacts(const Skeleton& skeleton, const Motion& motion,
                              const SurfaceProxy& proxy, const ContactThresholds& thresholds) {
  require_frames(motion, 2);
  proxy.validate(skeleton);
  const auto feet = ankle_joints(skeleton);
  const auto positions = kernels::parallel::batch_forward_kinematics(skeleton, motion.frames);
  const auto raw = joint_contacts(positions, {feet[0], feet[1]}, proxy, thresholds);
  ContactLabels labels;
  labels.labels.reserve(raw.size());
  for (const auto& row : raw) labels.labels.push_back({row[0], row[1]});
  return labels;
}

double reward_foot_sliding(const Skeleton& skeleton, const Motion& motion,
                           const ContactLabels& contacts) {
  require_frames(motion, 2);
  if (contacts.length() != motion.length())
    throw ValidationError("contact labels and motion differ in length");
  const auto feet = ankle_joints(skeleton);
  const auto positions = kernels::parallel::batch_forward_kinematics(skeleton, motion.frames);
  double total = 0.0;
  for (std::size_t i = 1; i < motion.length(); ++i) {
    double squared = 0.0;
    for (std::size_t foot = 0; foot < 2; ++foot) {
      const double mask = contacts.labels[i][foot] * contacts.labels[i - 1][foot];
      squared += ((positions[i][feet[foot]] - positions[i - 1][feet[foot]]) * mask).squaredNorm();
    }
    total += std::exp(-std::sqrt(squared));
  }
  return total / static_cast<double>(motion.length() - 1);
}

double floating_reward_from_lowest(const std::vector<double>& lowest, double ground) {
  double total = 0.0;
  for (double h : lowest) total += std::exp(-(h > ground ? h - ground : 0.0));
  return total / static_cast<double>(lowest.size());
}

double penetration_reward_from_lowest(const std::vector<double>& lowest, double ground) {
  double total = 0.0;
  for (double h : lowest) total += std::exp(-(h < ground ? ground - h : 0.0));
  return total / static_cast<double>(lowest.size());
}

double float_mm_from_lowest(const std::vector<double>& lowest, double ground) {
  double total = 0.0;
  for (double h : lowest) total += h > ground ? h - ground : 0.0;
  return kMetersToMillimeters * total / static_cast<double>(lowest.size());
}

double pene_mm_from_lowest(const std::vector<double>& lowest, double ground) {
  double total = 0.0;
  for (double h : lowest) total += h < ground ? ground - h : 0.0;
  return kMetersToMillimeters * total / static_cast<double>(lowest.size());
}

double reward_floating(const Skeleton& skeleton, const Motion& motion, const SurfaceProxy& proxy) {
  require_frames(motion, 1);
  return floating_reward_from_lowest(lowest_points(skeleton, motion, proxy), proxy.ground_height);
}

double reward_penetration(const Skeleton& skeleton, const Motion& motion,
                          const SurfaceProxy& proxy) {
  require_frames(motion, 1);
  return penetration_reward_from_lowest(lowest_points(skeleton, motion, proxy), proxy.ground_height);
}

RewardBreakdown combined_reward(const Skeleton& skeleton, const Motion& motion,
                                const ContactLabels& contacts, const SurfaceProxy& proxy,
                                const RewardWeights& weights) {
  const double weight_sum = weights.sliding + weights.floating + weights.penetration;
  if (weights.sliding < 0 || weights.floating < 0 || weights.penetration < 0 || !(weight_sum > 0))
    throw ValidationError("reward weights must be non-negative with a positive sum");
  const auto lowest = lowest_points(skeleton, motion, proxy);
  RewardBreakdown r;
  r.sliding = reward_foot_sliding(skeleton, motion, contacts);
  r.floating = floating_reward_from_lowest(lowest, proxy.ground_height);
  r.penetration = penetration_reward_from_lowest(lowest, proxy.ground_height);
  r.combined = (weights.sliding * r.sliding + weights.floating * r.floating +
                weights.penetration * r.penetration) /
               weight_sum;
  return r;
}

RewardBreakdown combined_reward(const Skeleton& skeleton, const Motion& motion,
                                const SurfaceProxy& proxy, const RewardWeights& weights) {
  return combined_reward(skeleton, motion, derive_contacts(skeleton, motion, proxy), proxy, weights);
}

double metric_float(const Skeleton& skeleton, const Motion& motion, const SurfaceProxy& proxy) {
  require_frames(motion, 1);
  return float_mm_from_lowest(lowest_points(skeleton, motion, proxy), proxy.ground_height);
}

double metric_pene(const Skeleton& skeleton, const Motion& motion, const SurfaceProxy& proxy) {
  require_frames(motion, 1);
  return pene_mm_from_lowest(lowest_points(skeleton, motion, proxy), proxy.ground_height);
}

}  // namespace kinoplan::physics
