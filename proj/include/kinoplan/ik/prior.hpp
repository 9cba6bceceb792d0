#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinoplan/core/pose.hpp"

namespace kinoplan::ik {

/// Latent pose model. decode maps a latent vector to a flat pose vector;
/// the six root entries of a decoded pose are ignored by the solver, which
/// optimizes root placement separately.
class PosePrior {
 public:
  virtual ~PosePrior() = default;

  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t pose_dim() const = 0;
  virtual Eigen::VectorXd decode(const Eigen::VectorXd& latent) const = 0;
  virtual Eigen::VectorXd encode(const Eigen::VectorXd& pose) const = 0;

  /// d decode / d latent when known in closed form.
  virtual std::optional<Eigen::MatrixXd> decode_jacobian(const Eigen::VectorXd& latent) const;
};

/// D(z) = P z + mean with orthonormal columns of P; E(p) = P^T (p - mean).
/// Root rows of P and mean are zero.
class AffinePrior final : public PosePrior {
 public:
  /// basis: pose_dim x latent_dim. stddev: per-component spread of the fit data.
  AffinePrior(Eigen::MatrixXd basis, Eigen::VectorXd mean, Eigen::VectorXd stddev);

  /// Principal components of the body rows of `samples` (one pose per row).
  static AffinePrior fit(const Eigen::MatrixXd& samples, std::size_t latent_dim);

  std::size_t latent_dim() const override { return static_cast<std::size_t>(basis_.cols()); }
  std::size_t pose_dim() const override { return static_cast<std::size_t>(basis_.rows()); }
  Eigen::VectorXd decode(const Eigen::VectorXd& latent) const override;
  Eigen::VectorXd encode(const Eigen::VectorXd& pose) const override;
  std::optional<Eigen::MatrixXd> decode_jacobian(const Eigen::VectorXd& latent) const override;

  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }

  /// z_k ~ N(0, stddev_k^2).
  Eigen::VectorXd sample_latent(std::uint64_t seed) const;

  /// Matrix-file form: "mean" 1 x pose_dim, "basis" latent_dim x pose_dim,
  /// "stddev" 1 x latent_dim.
  std::string serialize() const;
  static AffinePrior deserialize(const std::string& text);
  static AffinePrior load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  Eigen::MatrixXd basis_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

/// The latent is the body-rotation block of the pose itself.
class IdentityPrior final : public PosePrior {
 public:
  explicit IdentityPrior(std::size_t pose_dim);

  std::size_t latent_dim() const override { return pose_dim_ - 6; }
  std::size_t pose_dim() const override { return pose_dim_; }
  Eigen::VectorXd decode(const Eigen::VectorXd& latent) const override;
  Eigen::VectorXd encode(const Eigen::VectorXd& pose) const override;
  std::optional<Eigen::MatrixXd> decode_jacobian(const Eigen::VectorXd& latent) const override;

 private:
  std::size_t pose_dim_;
};

/// Random body poses from a small family of hand-set joint ranges (leg
/// flexion, squats, trunk bends, arm raises, elbow flexion) plus jitter.
/// Root entries are zero. Source data for AffinePrior::fit.
std::vector<Pose> synthetic_pose_samples(const Skeleton& skeleton, std::size_t count, std::uint64_t seed);

}  // namespace kinoplan::ik
