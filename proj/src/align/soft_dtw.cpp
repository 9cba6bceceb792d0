#include "kinoplan/align/soft_dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kinoplan/core/error.hpp"
#include "kinoplan/kernels/kernels.hpp"

namespace kinoplan::align {

namespace {

void require_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ValidationError("soft-DTW needs gamma > 0 (use hard_dtw for the limit)");
}

void require_nonempty(const Matrix& costs) {
  if (costs.rows() < 1 || costs.cols() < 1) throw ValidationError("cost matrix must be non-empty");
}

void require_same_width(const Matrix& keys, const Matrix& frames) {
  if (keys.cols() != frames.cols()) throw ValidationError("keys and frames differ in pose dimension");
  if (keys.rows() < 1 || frames.rows() < 1) throw ValidationError("keys and frames must be non-empty");
}

void require_tau(const AlignmentMap& tau, const Matrix& keys, const Matrix& frames) {
  if (tau.size() != static_cast<std::size_t>(keys.rows()))
    throw ValidationError("alignment map length differs from key count");
  for (std::size_t t : tau.tau)
    if (t >= static_cast<std::size_t>(frames.rows())) throw ValidationError("alignment index out of range");
}

}  // namespace

Matrix pose_rows(const std::vector<Pose>& poses) {
  if (poses.empty()) return {};
  Matrix m(static_cast<Eigen::Index>(poses.size()), static_cast<Eigen::Index>(poses.front().dimension()));
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (poses[i].dimension() != poses.front().dimension())
      throw ValidationError("poses differ in dimension");
    m.row(static_cast<Eigen::Index>(i)) = poses[i].to_vector().transpose();
  }
  return m;
}

Matrix cost_matrix(const Matrix& keys, const Matrix& frames) {
  require_same_width(keys, frames);
  return kernels::parallel::cost_matrix(keys, frames);
}

Matrix cost_matrix(const std::vector<Pose>& keys, const std::vector<Pose>& frames) {
  return cost_matrix(pose_rows(keys), pose_rows(frames));
}

SoftDtwResult soft_dtw(const Matrix& costs, double gamma) {
  require_gamma(gamma);
  require_nonempty(costs);
  SoftDtwResult out;
  out.cumulative = kernels::parallel::soft_dtw_forward(costs, gamma);
  out.value = out.cumulative(costs.rows(), costs.cols());
  out.gamma = gamma;
  return out;
}

Matrix soft_dtw_grad(const Matrix& costs, const SoftDtwResult& forward) {
  require_gamma(forward.gamma);
  require_nonempty(costs);
  if (forward.cumulative.rows() != costs.rows() + 1 || forward.cumulative.cols() != costs.cols() + 1)
    throw ValidationError("cumulative matrix does not match the cost matrix");
  return kernels::parallel::soft_dtw_backward(costs, forward.cumulative, forward.gamma);
}

Matrix soft_dtw_grad(const Matrix& costs, double gamma) { return soft_dtw_grad(costs, soft_dtw(costs, gamma)); }

HardDtwResult hard_dtw(const Matrix& costs) {
  require_nonempty(costs);
  const Eigen::Index k = costs.rows(), l = costs.cols();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Matrix r = Matrix::Constant(k + 1, l + 1, inf);
  r(0, 0) = 0.0;
  for (Eigen::Index i = 1; i <= k; ++i)
    for (Eigen::Index j = 1; j <= l; ++j)
      r(i, j) = costs(i - 1, j - 1) + std::min({r(i - 1, j - 1), r(i - 1, j), r(i, j - 1)});

  HardDtwResult out;
  out.value = r(k, l);
  Eigen::Index i = k, j = l;
  while (true) {
    out.path.emplace_back(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1));
    if (i == 1 && j == 1) break;
    const double diag = r(i - 1, j - 1), up = r(i - 1, j), left = r(i, j - 1);
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

AlignmentMap alignment_map(const Matrix& costs) {
  require_nonempty(costs);
  if (costs.rows() > costs.cols()) throw ValidationError("alignment needs at most as many keys as frames");
  const auto path = hard_dtw(costs).path;
  AlignmentMap map;
  map.tau.assign(static_cast<std::size_t>(costs.rows()), 0);
  std::vector<bool> seen(map.tau.size(), false);
  for (const auto& [i, j] : path) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (!seen[i] || costs(ii, static_cast<Eigen::Index>(j)) < costs(ii, static_cast<Eigen::Index>(map.tau[i]))) {
      map.tau[i] = j;
      seen[i] = true;
    }
  }
  return map;
}

double recon_loss(const Matrix& keys, const Matrix& frames, const AlignmentMap& tau) {
  require_same_width(keys, frames);
  require_tau(tau, keys, frames);
  double total = 0.0;
  for (Eigen::Index i = 0; i < keys.rows(); ++i)
    total += (keys.row(i) - frames.row(static_cast<Eigen::Index>(tau[static_cast<std::size_t>(i)]))).squaredNorm();
  return total / static_cast<double>(keys.rows());
}

LossGradient combined_loss(const Matrix& keys, const Matrix& frames, double gamma, double lambda,
                           const AlignmentMap& tau) {
  require_same_width(keys, frames);
  require_tau(tau, keys, frames);
  require_gamma(gamma);
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");

  const Matrix costs = kernels::parallel::cost_matrix(keys, frames);
  const SoftDtwResult sdtw = soft_dtw(costs, gamma);
  const Matrix occupancy = soft_dtw_grad(costs, sdtw);

  LossGradient out;
  out.alignment = tau;
  out.recon = recon_loss(keys, frames, tau);
  out.temporal = sdtw.value;
  out.loss = out.recon + lambda * out.temporal;

  // d D(i,j) / d frame_j = 2 (frame_j - key_i)
  const Eigen::VectorXd column_mass = occupancy.colwise().sum().transpose();
  out.gradient = 2.0 * lambda * (column_mass.asDiagonal() * frames - occupancy.transpose() * keys);
  const double scale = 2.0 / static_cast<double>(keys.rows());
  for (Eigen::Index i = 0; i < keys.rows(); ++i) {
    const auto j = static_cast<Eigen::Index>(tau[static_cast<std::size_t>(i)]);
    out.gradient.row(j) += scale * (frames.row(j) - keys.row(i));
  }
  return out;
}

LossGradient combined_loss(const Matrix& keys, const Matrix& frames, double gamma, double lambda) {
  require_same_width(keys, frames);
  return combined_loss(keys, frames, gamma, lambda, alignment_map(kernels::parallel::cost_matrix(keys, frames)));
}

}  // namespace kinoplan::align
