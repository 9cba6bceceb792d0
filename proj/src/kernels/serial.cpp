#include <algorithm>
#include <cmath>

#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/kernels/kernels.hpp"
#include "soft_dtw_cell.hpp"

namespace kinoplan::kernels {

double soft_min3(double a, double b, double c, double gamma) {
  // s >= 1, so the result never rounds above the hard minimum.
  const double m = std::min({a, b, c});
  const double s = std::exp((m - a) / gamma) + std::exp((m - b) / gamma) + std::exp((m - c) / gamma);
  return m - gamma * std::log(s);
}

namespace serial {

FramePositions batch_forward_kinematics(const Skeleton& skeleton, std::span<const Pose> poses) {
  FramePositions out(poses.size());
  for (std::size_t f = 0; f < poses.size(); ++f) out[f] = forward_kinematics(skeleton, poses[f]);
  return out;
}

Matrix cost_matrix(const Matrix& keys, const Matrix& frames) {
  Matrix d(keys.rows(), frames.rows());
  for (Eigen::Index i = 0; i < keys.rows(); ++i)
    for (Eigen::Index j = 0; j < frames.rows(); ++j) d(i, j) = detail::squared_distance(keys, i, frames, j);
  return d;
}

Matrix soft_dtw_forward(const Matrix& costs, double gamma) {
  const Eigen::Index k = costs.rows(), l = costs.cols();
  Matrix r = detail::forward_boundary(k, l);
  for (Eigen::Index i = 1; i <= k; ++i)
    for (Eigen::Index j = 1; j <= l; ++j) detail::forward_cell(costs, r, i, j, gamma);
  return r;
}

Matrix soft_dtw_backward(const Matrix& costs, const Matrix& cumulative, double gamma) {
  const Eigen::Index k = costs.rows(), l = costs.cols();
  detail::BackwardState state(costs, cumulative);
  for (Eigen::Index i = k; i >= 1; --i)
    for (Eigen::Index j = l; j >= 1; --j) detail::backward_cell(state, i, j, gamma);
  return state.occupancy.block(1, 1, k, l);
}

}  // namespace serial

}  // namespace kinoplan::kernels
