#include "kinoplan/ik/prior.hpp"

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/io.hpp"

namespace kinoplan::ik {

namespace {

constexpr Eigen::Index kRootDims = 6;

void require_size(const Eigen::VectorXd& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n)
    throw ValidationError(std::string(what) + " has dimension " + std::to_string(v.size()) + ", expected " +
                          std::to_string(n));
}

}  // namespace

std::optional<Eigen::MatrixXd> PosePrior::decode_jacobian(const Eigen::VectorXd&) const { return std::nullopt; }

AffinePrior::AffinePrior(Eigen::MatrixXd basis, Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : basis_(std::move(basis)), mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (basis_.rows() <= kRootDims || basis_.cols() < 1) throw ValidationError("prior basis has bad shape");
  if (mean_.size() != basis_.rows()) throw ValidationError("prior mean does not match basis rows");
  if (stddev_.size() != basis_.cols()) throw ValidationError("prior stddev does not match basis columns");
  if (!basis_.allFinite() || !mean_.allFinite() || !stddev_.allFinite())
    throw ValidationError("prior has non-finite entries");
  if ((stddev_.array() < 0.0).any()) throw ValidationError("prior stddev must be >= 0");
  if (!basis_.topRows(kRootDims).isZero(0.0) || !mean_.head(kRootDims).isZero(0.0))
    throw ValidationError("prior must not move the root");
  const Eigen::MatrixXd gram = basis_.transpose() * basis_;
  if (!gram.isIdentity(1e-8)) throw ValidationError("prior basis columns must be orthonormal");
}

AffinePrior AffinePrior::fit(const Eigen::MatrixXd& samples, std::size_t latent_dim) {
  const Eigen::Index dim = samples.cols();
  if (samples.rows() < 2 || dim <= kRootDims) throw ValidationError("prior fit needs at least two pose samples");
  const auto body = dim - kRootDims;
  if (latent_dim < 1 || static_cast<Eigen::Index>(latent_dim) > std::min<Eigen::Index>(body, samples.rows() - 1))
    throw ValidationError("latent dimension exceeds the rank available in the samples");

  const Eigen::MatrixXd x = samples.rightCols(body);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto d = static_cast<Eigen::Index>(latent_dim);

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(dim, d);
  basis.bottomRows(body) = svd.matrixV().leftCols(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    // fix the sign so the largest-magnitude entry is positive
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) *= -1.0;
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  mean.tail(body) = mu.transpose();
  const Eigen::VectorXd stddev =
      svd.singularValues().head(d) / std::sqrt(static_cast<double>(samples.rows() - 1));
  return AffinePrior(std::move(basis), std::move(mean), stddev);
}

Eigen::VectorXd AffinePrior::decode(const Eigen::VectorXd& latent) const {
  require_size(latent, latent_dim(), "latent");
  return basis_ * latent + mean_;
}

Eigen::VectorXd AffinePrior::encode(const Eigen::VectorXd& pose) const {
  require_size(pose, pose_dim(), "pose");
  return basis_.transpose() * (pose - mean_);
}

std::optional<Eigen::MatrixXd> AffinePrior::decode_jacobian(const Eigen::VectorXd&) const { return basis_; }

Eigen::VectorXd AffinePrior::sample_latent(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(stddev_.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = stddev_[k] * normal(rng);
  return z;
}

std::string AffinePrior::serialize() const {
  return io::write_matrices({{"mean", mean_.transpose()}, {"basis", basis_.transpose()}, {"stddev", stddev_.transpose()}});
}

AffinePrior AffinePrior::deserialize(const std::string& text) {
  const auto matrices = io::read_matrices(text);
  const auto& mean = io::find_matrix(matrices, "mean");
  const auto& basis = io::find_matrix(matrices, "basis");
  const auto& stddev = io::find_matrix(matrices, "stddev");
  if (mean.rows() != 1 || stddev.rows() != 1) throw FormatError("prior mean and stddev must be row vectors");
  return AffinePrior(basis.transpose(), mean.row(0).transpose(), stddev.row(0).transpose());
}

AffinePrior AffinePrior::load(const std::filesystem::path& path) { return deserialize(io::read_text(path)); }

void AffinePrior::save(const std::filesystem::path& path) const { io::write_text(path, serialize()); }

IdentityPrior::IdentityPrior(std::size_t pose_dim) : pose_dim_(pose_dim) {
  if (pose_dim <= static_cast<std::size_t>(kRootDims)) throw ValidationError("identity prior needs body joints");
}

Eigen::VectorXd IdentityPrior::decode(const Eigen::VectorXd& latent) const {
  require_size(latent, latent_dim(), "latent");
  Eigen::VectorXd pose = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pose_dim_));
  pose.tail(latent.size()) = latent;
  return pose;
}

Eigen::VectorXd IdentityPrior::encode(const Eigen::VectorXd& pose) const {
  require_size(pose, pose_dim_, "pose");
  return pose.tail(static_cast<Eigen::Index>(latent_dim()));
}

std::optional<Eigen::MatrixXd> IdentityPrior::decode_jacobian(const Eigen::VectorXd&) const {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pose_dim_), static_cast<Eigen::Index>(latent_dim()));
  j.bottomRows(static_cast<Eigen::Index>(latent_dim())).setIdentity();
  return j;
}

std::vector<Pose> synthetic_pose_samples(const Skeleton& skeleton, std::size_t count, std::uint64_t seed) {
  if (!skeleton.is_standard()) throw ValidationError("synthetic samples need the standard skeleton");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.04);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto j = [&](const char* name) { return skeleton.index_of(name) - 1; };  // body index

  std::vector<Pose> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Pose p = Pose::zero(skeleton);
    auto& b = p.body_rotations;

    // legs: forward hip flexion is negative about X, knees bend positive
    const double squat = unit(rng) < 0.3 ? range(0.0, 1.2) : 0.0;
    for (const char* side : {"left", "right"}) {
      const std::string s(side);
      const double swing = range(-0.6, 0.5);
      const double hip = swing - squat;
      const double knee = std::max(0.0, range(0.0, 0.5) + squat * 1.8 + std::max(0.0, -swing) * 0.8);
      b[j((s + "_hip").c_str())] += Vec3(hip, range(-0.15, 0.15), (s == "left" ? 1 : -1) * range(0.0, 0.25));
      b[j((s + "_knee").c_str())] += Vec3(knee, 0.0, 0.0);
      b[j((s + "_ankle").c_str())] += Vec3(range(-0.3, 0.3) - 0.4 * squat, 0.0, 0.0);
    }

    // trunk: flexion, side bend and twist spread over the three spine joints
    const Vec3 trunk(range(-0.2, 0.6), range(-0.4, 0.4), range(-0.25, 0.25));
    for (const char* name : {"spine1", "spine2", "spine3"}) b[j(name)] += trunk / 3.0;
    b[j("neck")] += Vec3(range(-0.3, 0.3), range(-0.4, 0.4), 0.0);
    b[j("head")] += Vec3(range(-0.2, 0.2), range(-0.3, 0.3), 0.0);

    // arms: left arm points along +X, so raising it is +Z and reaching forward is -Y
    for (const char* side : {"left", "right"}) {
      const std::string s(side);
      const double sign = s == "left" ? 1.0 : -1.0;
      const double raise = range(-1.4, 1.4);
      const double reach = range(-1.2, 0.4);
      const double elbow = range(0.0, 2.0);
      b[j((s + "_collar").c_str())] += Vec3(0.0, 0.0, sign * 0.15 * raise);
      b[j((s + "_shoulder").c_str())] += Vec3(range(-0.5, 0.5), sign * reach, sign * raise);
      b[j((s + "_elbow").c_str())] += Vec3(0.0, -sign * elbow, 0.0);
      b[j((s + "_wrist").c_str())] += Vec3(range(-0.4, 0.4), 0.0, range(-0.3, 0.3));
    }

    for (auto& r : b)
      for (int c = 0; c < 3; ++c) r[c] += jitter(rng);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace kinoplan::ik
