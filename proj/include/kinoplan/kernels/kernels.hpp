#pragma once

// Data-parallel inner loops. Each kernel exists twice: `serial` is the
// reference kept for testing, `parallel` is the OpenMP version used by the
// library. Both evaluate the same per-element arithmetic in the same order,
// so their outputs are bit-identical; the unit tests assert exactly that.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "kinoplan/core/pose.hpp"

namespace kinoplan::kernels {

/// Stand-in for +infinity on the soft-DTW boundary.
inline constexpr double kSoftDtwInfinity = 1e30;

/// Soft minimum -gamma * log(sum exp(-x / gamma)) with max subtraction.
double soft_min3(double a, double b, double c, double gamma);

using Matrix = Eigen::MatrixXd;
using FramePositions = std::vector<std::vector<Vec3>>;

namespace serial {

FramePositions batch_forward_kinematics(const Skeleton& skeleton, std::span<const Pose> poses);

/// D(i, j) = || keys.row(i) - frames.row(j) ||^2.
Matrix cost_matrix(const Matrix& keys, const Matrix& frames);

/// Cumulative soft-DTW costs, (K+1) x (L+1) with the boundary row/column.
Matrix soft_dtw_forward(const Matrix& costs, double gamma);

/// d R(K,L) / d D(i,j), K x L.
Matrix soft_dtw_backward(const Matrix& costs, const Matrix& cumulative, double gamma);

}  // namespace serial

namespace parallel {

FramePositions batch_forward_kinematics(const Skeleton& skeleton, std::span<const Pose> poses);
Matrix cost_matrix(const Matrix& keys, const Matrix& frames);
/// Anti-diagonal wavefront over the recursion.
Matrix soft_dtw_forward(const Matrix& costs, double gamma);
Matrix soft_dtw_backward(const Matrix& costs, const Matrix& cumulative, double gamma);

}  // namespace parallel

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();

}  // namespace kinoplan::kernels
