#include "kinoplan/completion/completion.hpp"

#include <cmath>

#include "kinoplan/core/error.hpp"

namespace kinoplan::completion {

using Eigen::MatrixXd;

void CompletionConfig::validate(std::size_t key_count) const {
  if (key_count == 0) throw ValidationError("completion needs at least one key pose");
  if (target_length <= key_count)
    throw ValidationError("target length L must exceed the key count K (L=" + std::to_string(target_length) +
                          ", K=" + std::to_string(key_count) + ")");
  if (!(lambda >= 0.0) || !(smoothness >= 0.0)) throw ValidationError("completion weights must be >= 0");
  if (!(gamma > 0.0)) throw ValidationError("soft-DTW gamma must be > 0");
  if (max_steps < 0) throw ValidationError("max_steps must be >= 0");
  if (!(step_size >= 0.0)) throw ValidationError("step size must be >= 0");
  if (tau_refresh < 1) throw ValidationError("tau refresh interval must be >= 1");
  if (!(fps > 0.0)) throw ValidationError("fps must be > 0");
}

std::vector<std::size_t> key_placement(std::size_t key_count, std::size_t length) {
  std::vector<std::size_t> idx(key_count, 0);
  if (key_count < 2) return idx;
  for (std::size_t i = 0; i < key_count; ++i) idx[i] = i * (length - 1) / (key_count - 1);
  return idx;
}

Motion initialize(const std::vector<Pose>& keys, std::size_t length, double fps) {
  if (keys.empty()) throw ValidationError("initialize needs at least one key pose");
  if (length == 0) throw ValidationError("motion length must be > 0");
  Motion motion;
  motion.fps = fps;
  if (keys.size() < 2) {
    motion.frames.assign(length, keys.front());
    return motion;
  }
  if (length < keys.size()) throw ValidationError("motion length must be >= key count");
  const auto at = key_placement(keys.size(), length);
  motion.frames.resize(length);
  for (std::size_t k = 0; k + 1 < keys.size(); ++k) {
    const Pose& a = keys[k];
    const Pose& b = keys[k + 1];
    if (a.body_rotations.size() != b.body_rotations.size()) throw ValidationError("key poses differ in size");
    const std::size_t t0 = at[k];
    const std::size_t t1 = at[k + 1];
    for (std::size_t t = t0; t <= t1; ++t) {
      const double s = t1 == t0 ? 0.0 : static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
      if (t == t0) {
        motion.frames[t] = a;
        continue;
      }
      if (t == t1) {
        motion.frames[t] = b;
        continue;
      }
      Pose p = a;
      p.root_translation = (1.0 - s) * a.root_translation + s * b.root_translation;
      p.root_rotation = slerp_euler_xyz(a.root_rotation, b.root_rotation, s);
      for (std::size_t j = 0; j < p.body_rotations.size(); ++j)
        p.body_rotations[j] = slerp_euler_xyz(a.body_rotations[j], b.body_rotations[j], s);
      motion.frames[t] = p;
    }
  }
  return motion;
}

double smoothness_term(const MatrixXd& frames) {
  double sum = 0.0;
  for (Eigen::Index t = 1; t + 1 < frames.rows(); ++t)
    sum += (frames.row(t + 1) - 2.0 * frames.row(t) + frames.row(t - 1)).squaredNorm();
  return sum;
}

MatrixXd smoothness_grad(const MatrixXd& frames) {
  MatrixXd g = MatrixXd::Zero(frames.rows(), frames.cols());
  for (Eigen::Index t = 1; t + 1 < frames.rows(); ++t) {
    const Eigen::RowVectorXd d = frames.row(t + 1) - 2.0 * frames.row(t) + frames.row(t - 1);
    g.row(t + 1) += 2.0 * d;
    g.row(t) -= 4.0 * d;
    g.row(t - 1) += 2.0 * d;
  }
  return g;
}

ObjectiveValue objective(const MatrixXd& keys, const MatrixXd& frames, const CompletionConfig& config,
                         const align::AlignmentMap& tau) {
  ObjectiveValue v;
  v.data = align::combined_loss(keys, frames, config.gamma, config.lambda, tau);
  v.smoothness = smoothness_term(frames);
  v.total = v.data.loss + config.smoothness * v.smoothness;
  v.gradient = v.data.gradient;
  if (config.smoothness != 0.0) v.gradient += config.smoothness * smoothness_grad(frames);
  return v;
}

CompletionResult complete(const std::vector<Pose>& keys, const CompletionConfig& config) {
  config.validate(keys.size());
  return complete(keys, initialize(keys, config.target_length, config.fps), config);
}

CompletionResult complete(const std::vector<Pose>& keys, const Motion& init, const CompletionConfig& config) {
  config.validate(keys.size());
  if (init.length() != config.target_length) throw ValidationError("initial motion length differs from L");
  const MatrixXd key_rows = align::pose_rows(keys);
  MatrixXd frames = init.to_matrix();
  if (key_rows.cols() != frames.cols()) throw ValidationError("key poses and motion differ in dimension");

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  MatrixXd m = MatrixXd::Zero(frames.rows(), frames.cols());
  MatrixXd v = MatrixXd::Zero(frames.rows(), frames.cols());

  CompletionResult result;
  MatrixXd best = frames;
  double best_loss = std::numeric_limits<double>::infinity();
  align::AlignmentMap tau;
  align::AlignmentMap best_tau;

  const int steps = std::max(config.max_steps, 1);
  result.loss_history.reserve(static_cast<std::size_t>(steps));
  for (int step = 0; step < steps; ++step) {
    if (step % config.tau_refresh == 0) tau = align::alignment_map(align::cost_matrix(key_rows, frames));
    const ObjectiveValue obj = objective(key_rows, frames, config, tau);
    if (!std::isfinite(obj.total) || !obj.gradient.allFinite())
      throw NumericalError("completion diverged at step " + std::to_string(step));
    if (obj.total < best_loss) {
      best_loss = obj.total;
      best = frames;
      best_tau = tau;
      result.best_step = step;
    }
    result.loss_history.push_back(best_loss);
    if (step + 1 == steps) break;

    m = beta1 * m + (1.0 - beta1) * obj.gradient;
    v = beta2 * v + (1.0 - beta2) * obj.gradient.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, step + 1);
    const double c2 = 1.0 - std::pow(beta2, step + 1);
    frames.array() -= config.step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }

  result.motion = Motion::from_matrix(best, init.fps);
  result.final_loss = best_loss;
  result.alignment = best_tau;
  return result;
}

}  // namespace kinoplan::completion
