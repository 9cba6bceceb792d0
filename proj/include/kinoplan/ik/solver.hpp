#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "kinoplan/core/pose.hpp"
#include "kinoplan/ik/prior.hpp"

namespace kinoplan::ik {

using Vector6d = Eigen::Matrix<double, 6, 1>;

struct IkSettings {
  double regularizer_weight = 1.0;
  int max_iterations = 500;
  double step_size = 0.05;
  double tolerance = 1e-3;        // meters, max key-joint error
  double workspace_bound = 5.0;   // |root translation| per axis
  double gradient_tolerance = 1e-6;
  int plateau_patience = 10;      // iterations without improvement before halving the step
};

struct IkProblem {
  Skeleton skeleton;
  Keyframe target;  // absolute
  /// Which key joints (KeyJoint order) enter the loss. Entries past the
  /// skeleton's key-joint count are ignored.
  std::array<bool, kKeyJointCount> joint_mask{true, true, true, true, true};
  IkSettings settings;

  IkProblem(Skeleton skel, Keyframe tgt, IkSettings s = {});
  /// Skeleton indices of the active key joints.
  std::vector<std::size_t> active_joints() const;
};

/// Free variables: latent code plus root translation (3) and rotation (3).
struct IkVariables {
  Eigen::VectorXd latent;
  Vector6d root = Vector6d::Zero();
};

struct PoseLoss {
  double loss = 0.0;
  double residual = 0.0;  // max active key-joint error, meters (0 with no active joints)
  Eigen::VectorXd grad_latent;
  Vector6d grad_root = Vector6d::Zero();
};

/// Decoded pose with the root variables substituted in.
Pose assemble_pose(const IkVariables& vars, const PosePrior& prior);

/// sum of squared key-joint errors + w * ||z||^2 and its gradient. Uses the
/// prior's analytic Jacobian, else central differences with h = 1e-5.
PoseLoss pose_loss(const IkVariables& vars, const IkProblem& problem, const PosePrior& prior);

struct IkSolution {
  IkVariables variables;
  Pose pose;
  double loss = 0.0;
  double residual = 0.0;
  bool converged = false;
  int iterations_used = 0;
  std::vector<double> loss_history;  // best loss so far, per iteration
};

/// Adam with plateau step decay; returns the best iterate. Root translation
/// is clamped to the workspace box. Stops on small gradient, on residual
/// within tolerance (only when some joint is active), or after
/// max_iterations. NumericalError on NaN.
IkSolution solve(const IkProblem& problem, const PosePrior& prior, const IkVariables& init);

/// Starting point for a target: E(rest pose) and the root at the target pelvis.
IkVariables default_init(const IkProblem& problem, const PosePrior& prior);

/// Frame i warm-starts from frame i-1's solution. Errors carry the frame index.
std::vector<IkSolution> solve_sequence(const KeyframePlan& plan, const PosePrior& prior, const Skeleton& skeleton,
                                       const IkSettings& settings);

}  // namespace kinoplan::ik
