#pragma once

// Dense motion from sparse key poses by direct trajectory optimization of
// recon + lambda * soft-DTW + mu * second-difference smoothness.

#include <cstdint>
#include <vector>

#include "kinoplan/align/soft_dtw.hpp"
#include "kinoplan/core/pose.hpp"

namespace kinoplan::completion {

struct CompletionConfig {
  std::size_t target_length = 60;
  double lambda = 0.01;
  double gamma = 0.1;
  double smoothness = 0.1;
  int max_steps = 2000;
  double step_size = 1e-2;
  int tau_refresh = 10;  // steps between alignment updates
  std::uint64_t seed = 0;
  double fps = 20.0;

  void validate(std::size_t key_count) const;
};

struct CompletionResult {
  Motion motion;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // best loss so far, one entry per step
  align::AlignmentMap alignment;
  int best_step = 0;
};

/// Frame index key i is placed at by initialize: floor(i (L-1) / (K-1)).
std::vector<std::size_t> key_placement(std::size_t key_count, std::size_t length);

/// Keys at key_placement indices; in between, translation is interpolated
/// linearly and every joint rotation by quaternion slerp. A single key is
/// repeated.
Motion initialize(const std::vector<Pose>& keys, std::size_t length, double fps = 20.0);

/// sum_t ||p_{t+1} - 2 p_t + p_{t-1}||^2 over rows.
double smoothness_term(const Eigen::MatrixXd& frames);
/// Gradient of smoothness_term, same shape as frames.
Eigen::MatrixXd smoothness_grad(const Eigen::MatrixXd& frames);

struct ObjectiveValue {
  double total = 0.0;
  align::LossGradient data;  // recon + lambda * temporal part
  double smoothness = 0.0;   // unweighted
  Eigen::MatrixXd gradient;
};

/// Full objective at fixed tau.
ObjectiveValue objective(const Eigen::MatrixXd& keys, const Eigen::MatrixXd& frames, const CompletionConfig& config,
                         const align::AlignmentMap& tau);

/// Adam over all L x dim motion scalars, tau refreshed every tau_refresh
/// steps; returns the best iterate. NumericalError names the failing step.
CompletionResult complete(const std::vector<Pose>& keys, const CompletionConfig& config);
/// Same, starting from a given motion.
CompletionResult complete(const std::vector<Pose>& keys, const Motion& init, const CompletionConfig& config);

}  // namespace kinoplan::completion
