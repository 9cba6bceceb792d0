#pragma once

// Soft dynamic time warping between a short sequence of key poses and a dense
// motion. Indices are 0-based throughout; rows are keys, columns are frames.

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "kinoplan/core/pose.hpp"

namespace kinoplan::align {

using Matrix = Eigen::MatrixXd;

/// Stacks pose vectors as rows.
Matrix pose_rows(const std::vector<Pose>& poses);

/// D(i, j) = ||keys_i - frames_j||^2 over full pose vectors.
Matrix cost_matrix(const Matrix& keys, const Matrix& frames);
Matrix cost_matrix(const std::vector<Pose>& keys, const std::vector<Pose>& frames);

struct SoftDtwResult {
  Matrix cumulative;  // (K+1) x (L+1), boundary row and column included
  double value = 0.0;
  double gamma = 0.0;
};

/// Throws ValidationError for gamma <= 0 or an empty matrix.
SoftDtwResult soft_dtw(const Matrix& costs, double gamma);

/// d value / d D(i, j): the expected alignment occupancy of each cell.
Matrix soft_dtw_grad(const Matrix& costs, double gamma);
Matrix soft_dtw_grad(const Matrix& costs, const SoftDtwResult& forward);

struct HardDtwResult {
  double value = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> path;  // from (0, 0) to (K-1, L-1)
};

/// Min-recursion with backtrace. Ties prefer the diagonal step, then the
/// step that advances the key index.
HardDtwResult hard_dtw(const Matrix& costs);

/// tau[i]: the frame aligned to key i. Among the frames the hard-DTW path
/// pairs with key i, the one with the smallest D(i, j), smallest j on ties.
struct AlignmentMap {
  std::vector<std::size_t> tau;

  std::size_t size() const { return tau.size(); }
  std::size_t operator[](std::size_t i) const { return tau[i]; }
  bool operator==(const AlignmentMap&) const = default;
};

/// Requires K <= L.
AlignmentMap alignment_map(const Matrix& costs);

/// (1/K) * sum_i ||keys_i - frames_tau(i)||^2.
double recon_loss(const Matrix& keys, const Matrix& frames, const AlignmentMap& tau);

struct LossGradient {
  double loss = 0.0;
  double recon = 0.0;
  double temporal = 0.0;  // soft-DTW value
  AlignmentMap alignment;
  Matrix gradient;        // d loss / d frames, L x dim
};

/// recon + lambda * soft_dtw, with tau recomputed from the current frames.
LossGradient combined_loss(const Matrix& keys, const Matrix& frames, double gamma, double lambda);
/// Same objective with tau held fixed.
LossGradient combined_loss(const Matrix& keys, const Matrix& frames, double gamma, double lambda,
                           const AlignmentMap& tau);

}  // namespace kinoplan::align
