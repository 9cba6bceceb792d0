#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/kernels/kernels.hpp"
#include "soft_dtw_cell.hpp"

namespace kinoplan::kernels {

namespace {
// Below this many cells per wavefront the fork/join cost dominates.
constexpr Eigen::Index kMinParallelDiagonal = 64;
constexpr Eigen::Index kMinParallelCells = 4096;
}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

FramePositions batch_forward_kinematics(const Skeleton& skeleton, std::span<const Pose> poses) {
  FramePositions out(poses.size());
  const auto n = static_cast<long>(poses.size());
#pragma omp parallel for schedule(static) if (n > 8)
  for (long f = 0; f < n; ++f) {
    const auto idx = static_cast<std::size_t>(f);
    out[idx] = forward_kinematics(skeleton, poses[idx]);
  }
  return out;
}

Matrix cost_matrix(const Matrix& keys, const Matrix& frames) {
  Matrix d(keys.rows(), frames.rows());
  const Eigen::Index rows = keys.rows(), cols = frames.rows();
#pragma omp parallel for collapse(2) schedule(static) if (rows * cols * keys.cols() > kMinParallelCells)
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) d(i, j) = detail::squared_distance(keys, i, frames, j);
  return d;
}

Matrix soft_dtw_forward(const Matrix& costs, double gamma) {
  const Eigen::Index k = costs.rows(), l = costs.cols();
  Matrix r = detail::forward_boundary(k, l);
  for (Eigen::Index diag = 2; diag <= k + l; ++diag) {
    const Eigen::Index lo = std::max<Eigen::Index>(1, diag - l);
    const Eigen::Index hi = std::min<Eigen::Index>(k, diag - 1);
#pragma omp parallel for schedule(static) if (hi - lo + 1 >= kMinParallelDiagonal)
    for (Eigen::Index i = lo; i <= hi; ++i) detail::forward_cell(costs, r, i, diag - i, gamma);
  }
  return r;
}

Matrix soft_dtw_backward(const Matrix& costs, const Matrix& cumulative, double gamma) {
  const Eigen::Index k = costs.rows(), l = costs.cols();
  detail::BackwardState state(costs, cumulative);
  for (Eigen::Index diag = k + l; diag >= 2; --diag) {
    const Eigen::Index lo = std::max<Eigen::Index>(1, diag - l);
    const Eigen::Index hi = std::min<Eigen::Index>(k, diag - 1);
#pragma omp parallel for schedule(static) if (hi - lo + 1 >= kMinParallelDiagonal)
    for (Eigen::Index i = lo; i <= hi; ++i) detail::backward_cell(state, i, diag - i, gamma);
  }
  return state.occupancy.block(1, 1, k, l);
}

}  // namespace parallel

}  // namespace kinoplan::kernels
