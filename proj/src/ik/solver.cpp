#include "kinoplan/ik/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/kinematics.hpp"

namespace kinoplan::ik {

namespace {

constexpr double kFiniteDifferenceStep = 1e-5;
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;
constexpr double kMinStep = 1e-9;

Eigen::MatrixXd numeric_decode_jacobian(const PosePrior& prior, const Eigen::VectorXd& z) {
  Eigen::MatrixXd j(static_cast<Eigen::Index>(prior.pose_dim()), z.size());
  Eigen::VectorXd probe = z;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    probe[k] = z[k] + kFiniteDifferenceStep;
    const Eigen::VectorXd plus = prior.decode(probe);
    probe[k] = z[k] - kFiniteDifferenceStep;
    const Eigen::VectorXd minus = prior.decode(probe);
    probe[k] = z[k];
    j.col(k) = (plus - minus) / (2.0 * kFiniteDifferenceStep);
  }
  return j;
}

void clamp_root(Vector6d& root, double bound) {
  for (int c = 0; c < 3; ++c) root[c] = std::clamp(root[c], -bound, bound);
}

void check_settings(const IkSettings& s) {
  if (!(s.regularizer_weight >= 0.0)) throw ValidationError("regularizer weight must be >= 0");
  if (s.max_iterations < 1) throw ValidationError("IK needs at least one iteration");
  if (!(s.step_size > 0.0)) throw ValidationError("IK step size must be positive");
  if (!(s.tolerance >= 0.0)) throw ValidationError("IK tolerance must be >= 0");
  if (!(s.workspace_bound > 0.0)) throw ValidationError("workspace bound must be positive");
  if (s.plateau_patience < 1) throw ValidationError("plateau patience must be positive");
}

}  // namespace

IkProblem::IkProblem(Skeleton skel, Keyframe tgt, IkSettings s)
    : skeleton(std::move(skel)), target(std::move(tgt)), settings(s) {
  check_settings(settings);
  if (target.mode != KeyframeMode::absolute) throw ValidationError("IK target must be absolute");
  if (!target.all_finite()) throw ValidationError("IK target has non-finite coordinates");
}

std::vector<std::size_t> IkProblem::active_joints() const {
  std::vector<std::size_t> out;
  const auto& keys = skeleton.key_joints();
  for (std::size_t k = 0; k < keys.size(); ++k)
    if (joint_mask[k]) out.push_back(keys[k]);
  return out;
}

Pose assemble_pose(const IkVariables& vars, const PosePrior& prior) {
  Eigen::VectorXd flat = prior.decode(vars.latent);
  flat.head<6>() = vars.root;
  return Pose::from_vector(flat);
}

PoseLoss pose_loss(const IkVariables& vars, const IkProblem& problem, const PosePrior& prior) {
  if (static_cast<std::size_t>(vars.latent.size()) != prior.latent_dim())
    throw ValidationError("latent dimension does not match the prior");
  if (prior.pose_dim() != problem.skeleton.pose_dimension())
    throw ValidationError("prior pose dimension does not match the skeleton");
  const Pose pose = assemble_pose(vars, prior);
  const auto positions = forward_kinematics(problem.skeleton, pose);
  const auto& keys = problem.skeleton.key_joints();
  const double w = problem.settings.regularizer_weight;

  PoseLoss out;
  std::vector<std::size_t> active;
  Eigen::VectorXd error;
  {
    std::vector<Vec3> errs;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (!problem.joint_mask[k]) continue;
      active.push_back(keys[k]);
      errs.push_back(positions[keys[k]] - problem.target.positions[k]);
    }
    error.resize(static_cast<Eigen::Index>(3 * errs.size()));
    for (std::size_t a = 0; a < errs.size(); ++a) {
      error.segment<3>(static_cast<Eigen::Index>(3 * a)) = errs[a];
      out.residual = std::max(out.residual, errs[a].norm());
    }
  }
  out.loss = error.squaredNorm() + w * vars.latent.squaredNorm();
  out.grad_latent = 2.0 * w * vars.latent;
  if (active.empty()) return out;

  // d loss / d pose = 2 J^T e, then through the decoder and the root block
  const Eigen::MatrixXd jac = position_jacobian(problem.skeleton, pose, active);
  const Eigen::VectorXd grad_pose = 2.0 * jac.transpose() * error;
  out.grad_root = grad_pose.head<6>();
  auto decoder = prior.decode_jacobian(vars.latent);
  const Eigen::MatrixXd dj = decoder ? std::move(*decoder) : numeric_decode_jacobian(prior, vars.latent);
  out.grad_latent += dj.bottomRows(dj.rows() - 6).transpose() * grad_pose.tail(grad_pose.size() - 6);
  return out;
}

IkVariables default_init(const IkProblem& problem, const PosePrior& prior) {
  IkVariables init;
  init.latent = prior.encode(Pose::zero(problem.skeleton).to_vector());
  const auto rest = forward_kinematics(problem.skeleton, Pose::zero(problem.skeleton));
  const std::size_t root_key = problem.skeleton.key_joints().front();
  if (root_key == 0) init.root.head<3>() = problem.target.positions[0] - rest[0];
  clamp_root(init.root, problem.settings.workspace_bound);
  return init;
}

IkSolution solve(const IkProblem& problem, const PosePrior& prior, const IkVariables& init) {
  const IkSettings& s = problem.settings;
  check_settings(s);
  if (!init.latent.allFinite() || !init.root.allFinite()) throw ValidationError("IK initial point is not finite");
  const bool has_targets = !problem.active_joints().empty();

  const Eigen::Index d = init.latent.size();
  Eigen::VectorXd x(d + 6);
  x << init.latent, init.root;
  {
    Vector6d root = init.root;
    clamp_root(root, s.workspace_bound);
    x.tail<6>() = root;
  }
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size()), v = Eigen::VectorXd::Zero(x.size());

  IkSolution best;
  best.loss = std::numeric_limits<double>::infinity();
  double step = s.step_size;
  int since_improvement = 0;
  int restart = 0;  // iteration the moment estimates were last reset

  for (int it = 0; it < s.max_iterations; ++it) {
    IkVariables vars{x.head(d), x.tail<6>()};
    const PoseLoss eval = pose_loss(vars, problem, prior);
    if (!std::isfinite(eval.loss) || !eval.grad_latent.allFinite() || !eval.grad_root.allFinite())
      throw NumericalError("IK produced a non-finite loss or gradient at iteration " + std::to_string(it));

    if (eval.loss < best.loss) {
      since_improvement = eval.loss < best.loss * (1.0 - 1e-12) ? 0 : since_improvement + 1;
      best.loss = eval.loss;
      best.residual = eval.residual;
      best.variables = vars;
    } else {
      ++since_improvement;
    }
    best.loss_history.push_back(best.loss);
    best.iterations_used = it + 1;

    Eigen::VectorXd g(x.size());
    g << eval.grad_latent, eval.grad_root;
    if (g.norm() < s.gradient_tolerance) break;
    if (has_targets && eval.residual <= s.tolerance) break;

    if (since_improvement >= s.plateau_patience) {
      // Fresh moments, so stale momentum does not keep overshooting.
      step = std::max(kMinStep, step * 0.5);
      since_improvement = 0;
      m.setZero();
      v.setZero();
      restart = it + 1;
      continue;
    }
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(kBeta1, it + 1 - restart), c2 = 1.0 - std::pow(kBeta2, it + 1 - restart);
    x.array() -= step * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEpsilon);
    Vector6d root = x.tail<6>();
    clamp_root(root, s.workspace_bound);
    x.tail<6>() = root;
  }

  best.pose = assemble_pose(best.variables, prior);
  best.converged = best.residual <= s.tolerance;
  return best;
}

std::vector<IkSolution> solve_sequence(const KeyframePlan& plan, const PosePrior& prior, const Skeleton& skeleton,
                                       const IkSettings& settings) {
  std::vector<IkSolution> out;
  out.reserve(plan.length());
  for (std::size_t i = 0; i < plan.length(); ++i) {
    try {
      if (plan.frames[i].mode != KeyframeMode::absolute) throw ValidationError("plan must be absolute");
      IkProblem problem(skeleton, plan.frames[i], settings);
      IkVariables init = out.empty() ? default_init(problem, prior) : out.back().variables;
      out.push_back(solve(problem, prior, init));
    } catch (const ValidationError& e) {
      throw ValidationError("keyframe " + std::to_string(i) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("keyframe " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kinoplan::ik
