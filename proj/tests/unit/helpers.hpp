#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Core>

#include "kinoplan/core/pose.hpp"

namespace testing {

inline kinoplan::Pose random_pose(const kinoplan::Skeleton& skeleton, std::mt19937_64& rng, double angle = 0.5,
                                  double translation = 1.0) {
  std::uniform_real_distribution<double> a(-angle, angle);
  std::uniform_real_distribution<double> t(-translation, translation);
  kinoplan::Pose p = kinoplan::Pose::zero(skeleton);
  p.root_translation = {t(rng), 0.9 + 0.1 * t(rng), t(rng)};
  p.root_rotation = {a(rng), a(rng), a(rng)};
  for (auto& r : p.body_rotations) r = {a(rng), a(rng), a(rng)};
  return p;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = 0.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// |a - b| / max(|a|, |b|, floor), elementwise max.
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), floor});
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / scale);
  }
  return worst;
}

/// Norm-wise relative error, robust to near-zero entries.
inline double relative_norm_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace testing
