#pragma once

// Denoising chain as an MDP with terminal-only reward, and clipped-surrogate
// policy optimization of a per-step affine Gaussian policy.

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace kinoplan::rl {

using Eigen::VectorXd;

struct DenoisingMdp {
  int steps = 1;            // T
  std::size_t dim = 0;      // flattened motion size
  VectorXd condition;       // opaque, may be empty
  double sigma_max = 0.5;   // sigma at t = T
  double sigma_min = 0.05;  // sigma at t = 1

  void validate() const;
  /// Linear from sigma_min (t = 1) to sigma_max (t = T); sigma_max when T = 1.
  double sigma(int t) const;
};

/// mu_t(m, c) = a_t .* m + B_t c + b_t for t = 1..T. Parameters are stored
/// per step as [a_t (dim), b_t (dim), B_t (dim x cond, column-major)].
class AffinePolicy {
 public:
  AffinePolicy(std::size_t dim, int steps, std::size_t condition_dim = 0);
  /// a = 0, B = 0, b_t = target for every t: the mean ignores the state.
  static AffinePolicy constant(const VectorXd& target, int steps, std::size_t condition_dim = 0);

  std::size_t dim() const { return dim_; }
  int steps() const { return steps_; }
  std::size_t condition_dim() const { return cond_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  std::size_t step_block() const { return 2 * dim_ + dim_ * cond_; }

  const VectorXd& parameters() const { return params_; }
  VectorXd& parameters() { return params_; }

  Eigen::Map<const VectorXd> scale(int t) const;
  Eigen::Map<const VectorXd> bias(int t) const;
  Eigen::Map<VectorXd> bias(int t);

  VectorXd mean(const VectorXd& state, int t, const VectorXd& condition) const;
  /// grad += (d mean / d theta)^T * v
  void accumulate_vjp(const VectorXd& state, int t, const VectorXd& condition, const VectorXd& v,
                      VectorXd& grad) const;

 private:
  std::size_t offset(int t) const { return static_cast<std::size_t>(t - 1) * step_block(); }

  std::size_t dim_;
  int steps_;
  std::size_t cond_;
  VectorXd params_;
};

/// log N(action; mean, sigma^2 I)
double gaussian_log_prob(const VectorXd& action, const VectorXd& mean, double sigma);

struct Trajectory {
  std::vector<VectorXd> states;   // states[k] = m_{T-k}
  std::vector<int> timesteps;     // T - k
  std::vector<VectorXd> actions;  // actions[k] = m_{T-k-1}
  std::vector<double> log_probs;  // under the behavior policy
  std::vector<double> rewards;    // zero except the last transition
  double reward = 0.0;            // r(m_0)

  std::size_t length() const { return actions.size(); }
  const VectorXd& final_sample() const { return actions.back(); }
};

using RewardFn = std::function<double(const VectorXd&)>;

/// m_T ~ N(0, I), then T draws a ~ N(mu(m_t), sigma_t^2 I).
Trajectory rollout(const DenoisingMdp& mdp, const AffinePolicy& policy, const RewardFn& reward, std::uint64_t seed);

/// Noise-free chain from m_T = 0.
VectorXd deterministic_sample(const DenoisingMdp& mdp, const AffinePolicy& policy);

struct PpoConfig {
  double clip = 1e-3;
  double kl_weight = 0.01;
  std::size_t buffer_size = 3000;
  int samples_per_iteration = 8;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  bool batch_mean_baseline = true;
  int epochs = 1;  // shuffled passes over the buffer per iteration
  std::uint64_t seed = 0;
  /// Divergence guard: abort when the iteration mean reward stays below
  /// guard_fraction * the first iteration's mean for guard_patience iterations.
  double guard_fraction = 0.1;
  int guard_patience = 20;

  void validate() const;
};

struct LossAndGradient {
  double value = 0.0;
  VectorXd gradient;
  double clip_fraction = 0.0;  // share of steps whose clipped branch is active
};

/// -mean over (trajectory, step) of min(rho A, clip(rho, 1-eps, 1+eps) A),
/// rho = p_theta / p_old per step, A = r - baseline broadcast to all steps.
LossAndGradient ppo_loss(const DenoisingMdp& mdp, const std::vector<const Trajectory*>& batch,
                         const AffinePolicy& policy, const AffinePolicy& behavior, const PpoConfig& config);

/// Mean over visited states of ||mu_theta - mu_ref||^2 / (2 sigma_t^2).
LossAndGradient kl_regularizer(const DenoisingMdp& mdp, const std::vector<const Trajectory*>& batch,
                               const AffinePolicy& policy, const AffinePolicy& reference);

struct TrainResult {
  AffinePolicy policy;
  std::vector<double> reward_curve;  // mean terminal reward per iteration
  std::vector<double> kl_curve;      // KL to the reference after each iteration
};

/// Called after every iteration with the updated policy.
using IterationCallback = std::function<void(int iteration, const AffinePolicy& policy)>;

/// Each iteration: snapshot theta_old, collect samples into the FIFO buffer,
/// then `epochs` shuffled passes over the buffer in minibatches, each an Adam step
/// on ppo_loss + kl_weight * kl_regularizer. The KL reference is the policy
/// passed in. NumericalError from the divergence guard or on NaN.
TrainResult post_train(const DenoisingMdp& mdp, const AffinePolicy& initial, const RewardFn& reward,
                       const PpoConfig& config, int iterations, const IterationCallback& callback = {});

/// Monte-Carlo mean terminal reward over `samples` rollouts.
double expected_reward(const DenoisingMdp& mdp, const AffinePolicy& policy, const RewardFn& reward, int samples,
                       std::uint64_t seed);

}  // namespace kinoplan::rl
