#pragma once

#include <array>
#include <vector>

#include "kinoplan/core/pose.hpp"

namespace kinoplan::physics {

/// Stand-in for the body surface: the lowest point of a pose is taken over
/// joint centers minus a per-joint downward radius. There is no mesh, so
/// values are approximations of mesh-vertex minima.
struct SurfaceProxy {
  std::vector<double> radii;  // one per joint, >= 0
  double ground_height = 0.0;

  /// Standard skeleton: 0.08 m for ankles, 0.02 m for toe joints, 0 elsewhere.
  static SurfaceProxy standard(const Skeleton& skeleton, double ground_height = 0.0);
  /// All radii zero.
  static SurfaceProxy points(const Skeleton& skeleton, double ground_height = 0.0);

  void validate(const Skeleton& skeleton) const;
};

/// contact[frame][foot], foot 0 = left ankle, foot 1 = right ankle.
struct ContactLabels {
  std::vector<std::array<int, 2>> labels;
  std::size_t length() const { return labels.size(); }
};

struct ContactThresholds {
  double height = 0.05;  // meters above ground
  double speed = 0.01;   // meters per frame
};

double lowest_point(const Skeleton& skeleton, const Pose& pose, const SurfaceProxy& proxy);

/// Lowest point of every frame.
std::vector<double> lowest_points(const Skeleton& skeleton, const Motion& motion,
                                  const SurfaceProxy& proxy);

/// Threshold contact rule for arbitrary joints. positions[frame][joint] are
/// world positions; result[frame][k] refers to joints[k]. Frame 0 reuses the
/// speed decision of frame 1.
std::vector<std::vector<int>> joint_contacts(const std::vector<std::vector<Vec3>>& positions,
                                             const std::vector<std::size_t>& joints,
                                             const SurfaceProxy& proxy,
                                             const ContactThresholds& thresholds = {});

ContactLabels derive_contacts(const Skeleton& skeleton, const Motion& motion,
                              const SurfaceProxy& proxy, const ContactThresholds& thresholds = {});

/// Mean over frames 2..L of exp(-|| per-foot displacement * c_i * c_{i-1} ||).
double reward_foot_sliding(const Skeleton& skeleton, const Motion& motion,
                           const ContactLabels& contacts);

double reward_floating(const Skeleton& skeleton, const Motion& motion, const SurfaceProxy& proxy);
double reward_penetration(const Skeleton& skeleton, const Motion& motion,
                          const SurfaceProxy& proxy);

struct RewardWeights {
  double sliding = 1.0 / 3.0;
  double floating = 1.0 / 3.0;
  double penetration = 1.0 / 3.0;
};

struct RewardBreakdown {
  double sliding = 1.0;
  double floating = 1.0;
  double penetration = 1.0;
  double combined = 1.0;
};

RewardBreakdown combined_reward(const Skeleton& skeleton, const Motion& motion,
                                const ContactLabels& contacts, const SurfaceProxy& proxy,
                                const RewardWeights& weights = {});

/// Same as above with contacts derived by the default threshold rule.
RewardBreakdown combined_reward(const Skeleton& skeleton, const Motion& motion,
                                const SurfaceProxy& proxy, const RewardWeights& weights = {});

/// Mean floating height in millimeters.
double metric_float(const Skeleton& skeleton, const Motion& motion, const SurfaceProxy& proxy);
/// Mean penetration depth in millimeters.
double metric_pene(const Skeleton& skeleton, const Motion& motion, const SurfaceProxy& proxy);

/// Per-frame helpers on precomputed lowest points, shared by the reward and
/// metric paths.
double floating_reward_from_lowest(const std::vector<double>& lowest, double ground);
double penetration_reward_from_lowest(const std::vector<double>& lowest, double ground);
double float_mm_from_lowest(const std::vector<double>& lowest, double ground);
double pene_mm_from_lowest(const std::vector<double>& lowest, double ground);

}  // namespace kinoplan::physics
