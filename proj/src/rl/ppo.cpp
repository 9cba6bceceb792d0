#include "kinoplan/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/hash.hpp"

namespace kinoplan::rl {

namespace {

std::uint64_t sample_seed(std::uint64_t base, int iteration, int sample) {
  Fnv1a h;
  h.bytes(&base, sizeof base);
  h.bytes(&iteration, sizeof iteration);
  h.bytes(&sample, sizeof sample);
  return h.value();
}

}  // namespace

void DenoisingMdp::validate() const {
  if (steps < 1) throw ValidationError("denoising steps T must be >= 1");
  if (dim == 0) throw ValidationError("motion dimension must be > 0");
  if (!(sigma_min > 0.0) || !(sigma_max > 0.0)) throw ValidationError("sigma schedule must be positive");
}

double DenoisingMdp::sigma(int t) const {
  if (t < 1 || t > steps) throw ValidationError("timestep out of range");
  if (steps == 1) return sigma_max;
  return sigma_min + (sigma_max - sigma_min) * static_cast<double>(t - 1) / static_cast<double>(steps - 1);
}

AffinePolicy::AffinePolicy(std::size_t dim, int steps, std::size_t condition_dim)
    : dim_(dim), steps_(steps), cond_(condition_dim) {
  if (dim == 0 || steps < 1) throw ValidationError("policy needs dim > 0 and T >= 1");
  params_ = VectorXd::Zero(static_cast<Eigen::Index>(step_block() * static_cast<std::size_t>(steps)));
}

AffinePolicy AffinePolicy::constant(const VectorXd& target, int steps, std::size_t condition_dim) {
  AffinePolicy p(static_cast<std::size_t>(target.size()), steps, condition_dim);
  for (int t = 1; t <= steps; ++t) p.bias(t) = target;
  return p;
}

Eigen::Map<const VectorXd> AffinePolicy::scale(int t) const {
  return {params_.data() + offset(t), static_cast<Eigen::Index>(dim_)};
}

Eigen::Map<const VectorXd> AffinePolicy::bias(int t) const {
  return {params_.data() + offset(t) + dim_, static_cast<Eigen::Index>(dim_)};
}

Eigen::Map<VectorXd> AffinePolicy::bias(int t) {
  return {params_.data() + offset(t) + dim_, static_cast<Eigen::Index>(dim_)};
}

VectorXd AffinePolicy::mean(const VectorXd& state, int t, const VectorXd& condition) const {
  VectorXd mu = scale(t).cwiseProduct(state) + bias(t);
  if (cond_ > 0) {
    if (static_cast<std::size_t>(condition.size()) != cond_) throw ValidationError("condition has wrong size");
    Eigen::Map<const Eigen::MatrixXd> b(params_.data() + offset(t) + 2 * dim_, static_cast<Eigen::Index>(dim_),
                                        static_cast<Eigen::Index>(cond_));
    mu += b * condition;
  }
  return mu;
}

void AffinePolicy::accumulate_vjp(const VectorXd& state, int t, const VectorXd& condition, const VectorXd& v,
                                  VectorXd& grad) const {
  const auto n = static_cast<Eigen::Index>(dim_);
  const auto o = static_cast<Eigen::Index>(offset(t));
  grad.segment(o, n) += v.cwiseProduct(state);
  grad.segment(o + n, n) += v;
  if (cond_ > 0) {
    Eigen::Map<Eigen::MatrixXd> gb(grad.data() + o + 2 * n, n, static_cast<Eigen::Index>(cond_));
    gb += v * condition.transpose();
  }
}

double gaussian_log_prob(const VectorXd& action, const VectorXd& mean, double sigma) {
  const double n = static_cast<double>(action.size());
  return -(action - mean).squaredNorm() / (2.0 * sigma * sigma) - n * std::log(sigma) -
         0.5 * n * std::log(2.0 * M_PI);
}

Trajectory rollout(const DenoisingMdp& mdp, const AffinePolicy& policy, const RewardFn& reward, std::uint64_t seed) {
  mdp.validate();
  if (policy.dim() != mdp.dim || policy.steps() != mdp.steps) throw ValidationError("policy does not fit the MDP");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(mdp.dim);
  VectorXd m(n);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = normal(rng);

  Trajectory traj;
  for (int t = mdp.steps; t >= 1; --t) {
    const double sigma = mdp.sigma(t);
    const VectorXd mu = policy.mean(m, t, mdp.condition);
    VectorXd a(n);
    for (Eigen::Index i = 0; i < n; ++i) a[i] = mu[i] + sigma * normal(rng);
    traj.states.push_back(m);
    traj.timesteps.push_back(t);
    traj.log_probs.push_back(gaussian_log_prob(a, mu, sigma));
    traj.actions.push_back(a);
    traj.rewards.push_back(0.0);
    m = std::move(a);
  }
  traj.reward = reward(traj.actions.back());
  traj.rewards.back() = traj.reward;
  return traj;
}

VectorXd deterministic_sample(const DenoisingMdp& mdp, const AffinePolicy& policy) {
  VectorXd m = VectorXd::Zero(static_cast<Eigen::Index>(mdp.dim));
  for (int t = mdp.steps; t >= 1; --t) m = policy.mean(m, t, mdp.condition);
  return m;
}

void PpoConfig::validate() const {
  if (!(clip > 0.0)) throw ValidationError("PPO clip must be > 0");
  if (!(kl_weight >= 0.0)) throw ValidationError("KL weight must be >= 0");
  if (buffer_size == 0 || batch_size == 0 || samples_per_iteration < 1)
    throw ValidationError("buffer, batch and sample counts must be positive");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning rate must be >= 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
}

LossAndGradient ppo_loss(const DenoisingMdp& mdp, const std::vector<const Trajectory*>& batch,
                         const AffinePolicy& policy, const AffinePolicy& behavior, const PpoConfig& config) {
  if (batch.empty()) throw ValidationError("PPO batch is empty");
  LossAndGradient out;
  out.gradient = VectorXd::Zero(static_cast<Eigen::Index>(policy.parameter_count()));
  double baseline = 0.0;
  if (config.batch_mean_baseline) {
    for (const auto* tr : batch) baseline += tr->reward;
    baseline /= static_cast<double>(batch.size());
  }
  std::size_t terms = 0;
  std::size_t clipped = 0;
  for (const auto* tr : batch) terms += tr->length();
  const double inv = 1.0 / static_cast<double>(terms);
  for (const auto* tr : batch) {
    const double adv = tr->reward - baseline;
    for (std::size_t k = 0; k < tr->length(); ++k) {
      const int t = tr->timesteps[k];
      const double sigma = mdp.sigma(t);
      const VectorXd mu = policy.mean(tr->states[k], t, mdp.condition);
      const VectorXd mu_old = behavior.mean(tr->states[k], t, mdp.condition);
      const double logp = gaussian_log_prob(tr->actions[k], mu, sigma);
      const double logp_old = gaussian_log_prob(tr->actions[k], mu_old, sigma);
      const double rho = std::exp(logp - logp_old);
      const double rho_c = std::clamp(rho, 1.0 - config.clip, 1.0 + config.clip);
      const double unclipped = rho * adv;
      const double clipped_term = rho_c * adv;
      if (unclipped <= clipped_term) {
        out.value -= unclipped * inv;
        // d(rho A)/d mu = rho A (a - mu) / sigma^2
        const VectorXd v = (-inv * adv * rho / (sigma * sigma)) * (tr->actions[k] - mu);
        policy.accumulate_vjp(tr->states[k], t, mdp.condition, v, out.gradient);
      } else {
        out.value -= clipped_term * inv;
        clipped += 1;
      }
    }
  }
  out.clip_fraction = static_cast<double>(clipped) * inv;
  return out;
}

LossAndGradient kl_regularizer(const DenoisingMdp& mdp, const std::vector<const Trajectory*>& batch,
                               const AffinePolicy& policy, const AffinePolicy& reference) {
  LossAndGradient out;
  out.gradient = VectorXd::Zero(static_cast<Eigen::Index>(policy.parameter_count()));
  std::size_t terms = 0;
  for (const auto* tr : batch) terms += tr->length();
  if (terms == 0) return out;
  const double inv = 1.0 / static_cast<double>(terms);
  for (const auto* tr : batch) {
    for (std::size_t k = 0; k < tr->length(); ++k) {
      const int t = tr->timesteps[k];
      const double s2 = mdp.sigma(t) * mdp.sigma(t);
      const VectorXd d = policy.mean(tr->states[k], t, mdp.condition) - reference.mean(tr->states[k], t, mdp.condition);
      out.value += inv * d.squaredNorm() / (2.0 * s2);
      policy.accumulate_vjp(tr->states[k], t, mdp.condition, (inv / s2) * d, out.gradient);
    }
  }
  return out;
}

TrainResult post_train(const DenoisingMdp& mdp, const AffinePolicy& initial, const RewardFn& reward,
                       const PpoConfig& config, int iterations, const IterationCallback& callback) {
  mdp.validate();
  config.validate();
  if (iterations < 0) throw ValidationError("iterations must be >= 0");
  if (initial.dim() != mdp.dim || initial.steps() != mdp.steps) throw ValidationError("policy does not fit the MDP");

  TrainResult result{initial, {}, {}};
  AffinePolicy& policy = result.policy;
  const AffinePolicy& reference = initial;
  std::deque<Trajectory> buffer;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto np = static_cast<Eigen::Index>(policy.parameter_count());
  VectorXd m1 = VectorXd::Zero(np);
  VectorXd m2 = VectorXd::Zero(np);
  long adam_step = 0;
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  double initial_mean = 0.0;
  int low_streak = 0;

  for (int it = 0; it < iterations; ++it) {
    const AffinePolicy behavior = policy;

    std::vector<Trajectory> fresh(static_cast<std::size_t>(config.samples_per_iteration));
#pragma omp parallel for schedule(static)
    for (int j = 0; j < config.samples_per_iteration; ++j)
      fresh[static_cast<std::size_t>(j)] = rollout(mdp, behavior, reward, sample_seed(config.seed, it, j));

    double mean_reward = 0.0;
    for (auto& tr : fresh) {
      if (!std::isfinite(tr.reward)) throw NumericalError("non-finite reward at iteration " + std::to_string(it));
      mean_reward += tr.reward;
      buffer.push_back(std::move(tr));
      if (buffer.size() > config.buffer_size) buffer.pop_front();
    }
    mean_reward /= config.samples_per_iteration;
    result.reward_curve.push_back(mean_reward);

    if (it == 0) initial_mean = mean_reward;
    if (initial_mean > 0.0 && mean_reward < config.guard_fraction * initial_mean) {
      if (++low_streak >= config.guard_patience) {
        std::ostringstream msg;
        msg << "PPO diverged: mean reward " << mean_reward << " below " << config.guard_fraction
            << " x initial " << initial_mean << " for " << low_streak << " iterations (iteration " << it << ")";
        throw NumericalError(msg.str());
      }
    } else {
      low_streak = 0;
    }

    std::vector<std::size_t> order(buffer.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<const Trajectory*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&buffer[order[i]]);

      auto surrogate = ppo_loss(mdp, batch, policy, behavior, config);
      VectorXd g = std::move(surrogate.gradient);
      if (config.kl_weight > 0.0) g += config.kl_weight * kl_regularizer(mdp, batch, policy, reference).gradient;
      if (!g.allFinite()) throw NumericalError("non-finite PPO gradient at iteration " + std::to_string(it));

      ++adam_step;
      m1 = beta1 * m1 + (1.0 - beta1) * g;
      m2 = beta2 * m2 + (1.0 - beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_step));
      policy.parameters().array() -= config.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
    }
    }

    std::vector<const Trajectory*> all;
    for (const auto& tr : buffer) all.push_back(&tr);
    result.kl_curve.push_back(kl_regularizer(mdp, all, policy, reference).value);
    if (callback) callback(it, policy);
  }
  return result;
}

double expected_reward(const DenoisingMdp& mdp, const AffinePolicy& policy, const RewardFn& reward, int samples,
                       std::uint64_t seed) {
  if (samples < 1) throw ValidationError("need at least one sample");
  std::vector<double> r(static_cast<std::size_t>(samples));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < samples; ++i)
    r[static_cast<std::size_t>(i)] = rollout(mdp, policy, reward, sample_seed(seed, -1, i)).reward;
  double sum = 0.0;
  for (double v : r) sum += v;
  return sum / samples;
}

}  // namespace kinoplan::rl
