#pragma once

// Per-cell arithmetic shared by the serial and parallel kernels.

#include <cmath>

#include "kinoplan/kernels/kernels.hpp"

namespace kinoplan::kernels::detail {

inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return s;
}

inline Matrix forward_boundary(Eigen::Index k, Eigen::Index l) {
  Matrix r = Matrix::Constant(k + 1, l + 1, kSoftDtwInfinity);
  r(0, 0) = 0.0;
  return r;
}

inline void forward_cell(const Matrix& costs, Matrix& r, Eigen::Index i, Eigen::Index j, double gamma) {
  r(i, j) = costs(i - 1, j - 1) + soft_min3(r(i - 1, j), r(i, j - 1), r(i - 1, j - 1), gamma);
}

/// Padded copies for the backward pass: costs and cumulative values are
/// extended by one row and column past (K, L); the extension of R is -inf
/// except the corner, which repeats R(K, L).
struct BackwardState {
  Matrix costs;
  Matrix cumulative;
  Matrix occupancy;

  BackwardState(const Matrix& d, const Matrix& r) {
    const Eigen::Index k = d.rows(), l = d.cols();
    costs = Matrix::Zero(k + 2, l + 2);
    costs.block(1, 1, k, l) = d;
    cumulative = Matrix::Constant(k + 2, l + 2, -kSoftDtwInfinity);
    cumulative.block(0, 0, k + 1, l + 1) = r;
    cumulative(k + 1, l + 1) = r(k, l);
    occupancy = Matrix::Zero(k + 2, l + 2);
    occupancy(k + 1, l + 1) = 1.0;
  }
};

inline void backward_cell(BackwardState& s, Eigen::Index i, Eigen::Index j, double gamma) {
  const double rij = s.cumulative(i, j);
  const double a = std::exp((s.cumulative(i + 1, j) - rij - s.costs(i + 1, j)) / gamma);
  const double b = std::exp((s.cumulative(i, j + 1) - rij - s.costs(i, j + 1)) / gamma);
  const double c = std::exp((s.cumulative(i + 1, j + 1) - rij - s.costs(i + 1, j + 1)) / gamma);
  s.occupancy(i, j) = a * s.occupancy(i + 1, j) + b * s.occupancy(i, j + 1) + c * s.occupancy(i + 1, j + 1);
}

}  // namespace kinoplan::kernels::detail
