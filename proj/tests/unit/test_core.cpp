#include <doctest.h>

#include <numbers>
#include <set>

#include "helpers.hpp"
#include "kinoplan/core/error.hpp"
#include "kinoplan/core/features.hpp"
#include "kinoplan/core/io.hpp"
#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/core/render.hpp"
#include "kinoplan/core/rotation.hpp"
#include "kinoplan/physics/physics.hpp"

using namespace kinoplan;

namespace {

bool is_ink(const Image& img, int x, int y) {
  const auto* p = img.pixel(x, y);
  const bool white = p[0] == 255 && p[1] == 255 && p[2] == 255;
  const bool ground = p[0] == 160 && p[1] == 160 && p[2] == 160;
  return !white && !ground;
}

double ink_mean_x(const Image& img) {
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (is_ink(img, x, y)) {
        sum += x;
        ++count;
      }
  return count ? sum / count : -1.0;
}

int lowest_ink_row(const Image& img) {
  for (int y = img.height - 1; y >= 0; --y)
    for (int x = 0; x < img.width; ++x)
      if (is_ink(img, x, y)) return y;
  return -1;
}

Motion walk_motion(const Skeleton& skel, std::size_t frames, double step) {
  Motion m;
  for (std::size_t t = 0; t < frames; ++t) {
    Pose p = standing_pose(skel);
    p.root_translation.z() += step * static_cast<double>(t);
    m.frames.push_back(p);
  }
  return m;
}

}  // namespace

TEST_SUITE("skeleton") {
  TEST_CASE("standard skeleton invariants") {
    const Skeleton s = Skeleton::standard();
    CHECK(s.joint_count() == 22);
    CHECK(s.pose_dimension() == 69);
    CHECK(s.parent(0) == -1);
    for (std::size_t j = 1; j < s.joint_count(); ++j) {
      CHECK(s.parent(j) >= 0);
      CHECK(static_cast<std::size_t>(s.parent(j)) < j);
    }
    const std::set<std::size_t> keys(s.key_joints().begin(), s.key_joints().end());
    CHECK(keys.size() == 5);
    CHECK(s.key_joint(KeyJoint::pelvis) == 0);
    CHECK(s.name(s.key_joint(KeyJoint::l_wrist)) == "left_wrist");
    CHECK(s.name(s.key_joint(KeyJoint::r_ankle)) == "right_ankle");
    CHECK(s.is_standard());
  }

  TEST_CASE("invalid skeletons are rejected") {
    CHECK_THROWS_AS(Skeleton({"a", "b"}, {-1, 1}, {Vec3::Zero(), Vec3::Zero()}, {0}), ValidationError);
    CHECK_THROWS_AS(Skeleton({"a", "b"}, {-1, 0}, {Vec3::Zero(), Vec3::Zero()}, {0, 0}), ValidationError);
    CHECK_THROWS_AS(Skeleton::planar_chain(1), ValidationError);
    CHECK_THROWS_AS(Skeleton::standard().index_of("tail"), ValidationError);
  }
}

TEST_SUITE("rotation") {
  TEST_CASE("intrinsic XYZ composition") {
    const Vec3 a(0.3, -0.2, 0.7);
    const Mat3 expected = Eigen::AngleAxisd(a.x(), Vec3::UnitX()).toRotationMatrix() *
                          Eigen::AngleAxisd(a.y(), Vec3::UnitY()).toRotationMatrix() *
                          Eigen::AngleAxisd(a.z(), Vec3::UnitZ()).toRotationMatrix();
    CHECK((euler_xyz_to_matrix(a) - expected).norm() < 1e-14);
  }

  TEST_CASE("matrix to euler round trip") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.4, 1.4);
    for (int i = 0; i < 50; ++i) {
      const Vec3 a(u(rng), u(rng), u(rng));
      CHECK((matrix_to_euler_xyz(euler_xyz_to_matrix(a)) - a).norm() < 1e-10);
    }
  }

  TEST_CASE("euler derivatives match finite differences") {
    const Vec3 a(0.4, 0.1, -0.9);
    const auto d = euler_xyz_derivatives(a);
    for (int k = 0; k < 3; ++k) {
      Vec3 up = a, down = a;
      up[k] += 1e-6;
      down[k] -= 1e-6;
      const Mat3 fd = (euler_xyz_to_matrix(up) - euler_xyz_to_matrix(down)) / 2e-6;
      CHECK((fd - d[static_cast<std::size_t>(k)]).norm() < 1e-8);
    }
  }

  TEST_CASE("slerp midpoint of a quarter turn") {
    const Vec3 mid = slerp_euler_xyz(Vec3::Zero(), Vec3(std::numbers::pi / 2, 0, 0), 0.5);
    CHECK(mid.x() == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
    CHECK(std::abs(mid.y()) < 1e-12);
    CHECK(std::abs(mid.z()) < 1e-12);
  }

  TEST_CASE("wrap_angle stays in (-pi, pi]") {
    for (double a : {-10.0, -3.5, 0.0, 3.5, 10.0}) {
      const double w = wrap_angle(a);
      CHECK(w > -std::numbers::pi - 1e-12);
      CHECK(w <= std::numbers::pi + 1e-12);
      CHECK(std::abs(std::remainder(w - a, 2 * std::numbers::pi)) < 1e-12);
    }
  }
}

TEST_SUITE("forward kinematics") {
  TEST_CASE("zero pose gives cumulative rest offsets") {
    const Skeleton s = Skeleton::standard();
    const auto pos = forward_kinematics(s, Pose::zero(s));
    for (std::size_t j = 0; j < s.joint_count(); ++j) {
      Vec3 expected = Vec3::Zero();
      for (int k = static_cast<int>(j); k >= 0; k = s.parent(static_cast<std::size_t>(k)))
        expected += s.offset(static_cast<std::size_t>(k));
      CHECK((pos[j] - expected).norm() < 1e-14);
    }
  }

  TEST_CASE("root translation shifts every joint") {
    const Skeleton s = Skeleton::standard();
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
      Pose p = testing::random_pose(s, rng);
      const Vec3 t = p.root_translation;
      const auto moved = forward_kinematics(s, p);
      p.root_translation = Vec3::Zero();
      const auto origin = forward_kinematics(s, p);
      for (std::size_t j = 0; j < s.joint_count(); ++j) CHECK((moved[j] - origin[j] - t).norm() < 1e-12);
      CHECK((moved[0] - t).norm() < 1e-15);
    }
  }

  TEST_CASE("planar chain with a right angle at the middle joint") {
    const Skeleton chain = Skeleton::planar_chain(3, 1.0);
    Pose p = Pose::zero(chain);
    p.body_rotations[0] = Vec3(0, 0, std::numbers::pi / 2);
    const auto pos = forward_kinematics(chain, p);
    CHECK((pos[1] - Vec3(1, 0, 0)).norm() < 1e-12);
    CHECK((pos[2] - Vec3(1, 1, 0)).norm() < 1e-12);
  }

  TEST_CASE("continuity under small angle changes") {
    const Skeleton s = Skeleton::standard();
    std::mt19937_64 rng(3);
    const Pose base = testing::random_pose(s, rng);
    const auto ref = forward_kinematics(s, base);
    // Chain length bounds the lever arm: every joint is within ~2 m of the root.
    const double lipschitz = 2.0;
    for (double delta : {1e-2, 1e-3, 1e-4, 1e-5}) {
      for (std::size_t j = 0; j < s.body_joint_count(); ++j) {
        for (int k = 0; k < 3; ++k) {
          Pose p = base;
          p.body_rotations[j][k] += delta;
          const auto moved = forward_kinematics(s, p);
          double worst = 0.0;
          for (std::size_t i = 0; i < moved.size(); ++i) worst = std::max(worst, (moved[i] - ref[i]).norm());
          CHECK(worst <= lipschitz * delta);
        }
      }
    }
  }

  TEST_CASE("position jacobian matches finite differences") {
    const Skeleton s = Skeleton::standard();
    std::mt19937_64 rng(4);
    const Pose p = testing::random_pose(s, rng);
    const auto joints = s.key_joints();
    const Eigen::MatrixXd jac = position_jacobian(s, p, joints);
    const Eigen::VectorXd x = p.to_vector();
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      Eigen::VectorXd up = x, down = x;
      up[c] += 1e-6;
      down[c] -= 1e-6;
      const auto fu = forward_kinematics(s, Pose::from_vector(up));
      const auto fdn = forward_kinematics(s, Pose::from_vector(down));
      for (std::size_t k = 0; k < joints.size(); ++k) {
        const Vec3 fd = (fu[joints[k]] - fdn[joints[k]]) / 2e-6;
        CHECK((fd - jac.block(3 * static_cast<Eigen::Index>(k), c, 3, 1)).norm() < 1e-7);
      }
    }
  }

  TEST_CASE("extract_key_positions masks FK") {
    const Skeleton s = Skeleton::standard();
    std::mt19937_64 rng(5);
    const Pose p = testing::random_pose(s, rng);
    const auto pos = forward_kinematics(s, p);
    const Keyframe k = extract_key_positions(s, p);
    CHECK(k.mode == KeyframeMode::absolute);
    for (std::size_t i = 0; i < kKeyJointCount; ++i) CHECK(k.positions[i] == pos[s.key_joints()[i]]);
    const Keyframe rest = extract_key_positions(s, Pose::zero(s));
    const auto rest_pos = forward_kinematics(s, Pose::zero(s));
    CHECK(rest[KeyJoint::l_ankle] == rest_pos[s.index_of("left_ankle")]);
  }

  TEST_CASE("check_pose rejects mismatched or non-finite poses") {
    const Skeleton s = Skeleton::standard();
    CHECK_THROWS_AS(check_pose(s, Pose::zero(3)), ValidationError);
    Pose p = Pose::zero(s);
    p.body_rotations[4].x() = std::nan("");
    CHECK_THROWS_AS(check_pose(s, p), ValidationError);
    Motion empty;
    CHECK_THROWS_AS(check_motion(s, empty), ValidationError);
  }
}

TEST_SUITE("keyframe plans") {
  Keyframe make_key(double x) {
    Keyframe k;
    for (auto& p : k.positions) p = Vec3(x, 0.5 * x, -x);
    return k;
  }

  TEST_CASE("zero deltas reproduce the initial frame") {
    KeyframePlan plan;
    for (int i = 0; i < 4; ++i) {
      Keyframe d;
      d.mode = KeyframeMode::delta;
      plan.frames.push_back(d);
    }
    const Keyframe init = standing_keyframe(Skeleton::standard());
    const auto abs = plan_to_absolute(plan, init);
    for (const auto& f : abs.frames) {
      CHECK(f.positions == init.positions);
      CHECK(f.mode == KeyframeMode::absolute);
    }
  }

  TEST_CASE("pelvis cumulative sum") {
    Keyframe init;
    init[KeyJoint::pelvis] = Vec3(0, 0.9, 0);
    KeyframePlan plan;
    for (int i = 0; i < 3; ++i) {
      Keyframe d;
      d.mode = KeyframeMode::delta;
      d[KeyJoint::pelvis] = Vec3(0, 0, 0.3);
      plan.frames.push_back(d);
    }
    const auto abs = plan_to_absolute(plan, init);
    CHECK((abs.frames[0][KeyJoint::pelvis] - Vec3(0, 0.9, 0.3)).norm() < 1e-15);
    CHECK((abs.frames[1][KeyJoint::pelvis] - Vec3(0, 0.9, 0.6)).norm() < 1e-15);
    CHECK((abs.frames[2][KeyJoint::pelvis] - Vec3(0, 0.9, 0.9)).norm() < 1e-15);
  }

  TEST_CASE("absolute plans pass through unchanged") {
    KeyframePlan plan;
    plan.prompt = "p";
    for (int i = 0; i < 3; ++i) plan.frames.push_back(make_key(i));
    CHECK(plan_to_absolute(plan, std::nullopt) == plan);
  }

  TEST_CASE("delta without predecessor is an error") {
    KeyframePlan plan;
    Keyframe d;
    d.mode = KeyframeMode::delta;
    plan.frames.push_back(d);
    CHECK_THROWS_AS(plan_to_absolute(plan, std::nullopt), ValidationError);
  }

  TEST_CASE("absolute -> delta -> absolute is the identity") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
      KeyframePlan plan;
      for (int i = 0; i < 6; ++i) {
        Keyframe k;
        for (auto& p : k.positions) p = Vec3(u(rng), u(rng), u(rng));
        plan.frames.push_back(k);
      }
      Keyframe init;
      for (auto& p : init.positions) p = Vec3(u(rng), u(rng), u(rng));
      const auto back = plan_to_absolute(plan_to_delta(plan, init), init);
      for (std::size_t i = 0; i < plan.length(); ++i)
        for (std::size_t k = 0; k < kKeyJointCount; ++k)
          CHECK((back.frames[i].positions[k] - plan.frames[i].positions[k]).norm() < 1e-12);
    }
  }
}

TEST_SUITE("features 263") {
  TEST_CASE("dimension and length") {
    const Skeleton s = Skeleton::standard();
    std::mt19937_64 rng(7);
    Motion m;
    for (int i = 0; i < 6; ++i) m.frames.push_back(testing::random_pose(s, rng));
    const auto f = to_feature_263(s, m);
    CHECK(f.size() == 5);
    CHECK(FeatureVector263::kDim == 263);
    CHECK(FeatureVector263::kFootContacts + 4 == 263);
    for (const auto& v : f)
      for (double c : v.foot_contacts()) CHECK((c == 0.0 || c == 1.0));
  }

  TEST_CASE("standing still") {
    const Skeleton s = Skeleton::standard();
    const auto f = to_feature_263(s, walk_motion(s, 5, 0.0));
    const double h = f[0].values[FeatureVector263::kRootHeight];
    for (const auto& v : f) {
      CHECK(v.values[FeatureVector263::kRootAngularVelocity] == doctest::Approx(0.0));
      CHECK(v.values[FeatureVector263::kRootLinearVelocity] == doctest::Approx(0.0));
      CHECK(v.values[FeatureVector263::kRootLinearVelocity + 1] == doctest::Approx(0.0));
      CHECK(v.values[FeatureVector263::kRootHeight] == h);
      for (double c : v.foot_contacts()) CHECK(c == 1.0);
    }
  }

  TEST_CASE("horizontal translation invariance") {
    const Skeleton s = Skeleton::standard();
    std::mt19937_64 rng(8);
    Motion m;
    for (int i = 0; i < 5; ++i) m.frames.push_back(testing::random_pose(s, rng, 0.3, 0.05));
    Motion shifted = m;
    for (auto& p : shifted.frames) p.root_translation += Vec3(3.0, 0.0, -2.0);
    const auto a = to_feature_263(s, m);
    const auto b = to_feature_263(s, shifted);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < 263; ++k) CHECK(a[i].values[k] == doctest::Approx(b[i].values[k]).epsilon(1e-9));
  }

  TEST_CASE("constant forward velocity") {
    const Skeleton s = Skeleton::standard();
    const auto f = to_feature_263(s, walk_motion(s, 6, 0.04));
    for (const auto& v : f) {
      const double vx = v.values[FeatureVector263::kRootLinearVelocity];
      const double vz = v.values[FeatureVector263::kRootLinearVelocity + 1];
      CHECK(std::hypot(vx, vz) == doctest::Approx(0.04).epsilon(1e-9));
    }
  }

  TEST_CASE("non-standard skeletons and short motions are rejected") {
    const Skeleton chain = Skeleton::planar_chain();
    Motion m;
    m.frames = {Pose::zero(chain), Pose::zero(chain)};
    CHECK_THROWS_AS(to_feature_263(chain, m), ValidationError);
    const Skeleton s = Skeleton::standard();
    CHECK_THROWS_AS(to_feature_263(s, walk_motion(s, 1, 0.0)), ValidationError);
  }
}

TEST_SUITE("render") {
  TEST_CASE("zero pose has ink and renders deterministically") {
    const Skeleton s = Skeleton::standard();
    const Image a = render_frame(s, Pose::zero(s));
    const Image b = render_frame(s, Pose::zero(s));
    CHECK(a.width == 224);
    CHECK(a.height == 224);
    CHECK(a == b);
    CHECK(ink_mean_x(a) > 0.0);
    CHECK(encode_png(a) == encode_png(b));
  }

  TEST_CASE("root X shift moves the figure right") {
    const Skeleton s = Skeleton::standard();
    Pose p = standing_pose(s);
    const double x0 = ink_mean_x(render_frame(s, p));
    p.root_translation.x() += 0.3;
    const double x1 = ink_mean_x(render_frame(s, p));
    const OrthoCamera cam;
    CHECK(x1 - x0 == doctest::Approx(0.3 * cam.pixels_per_meter).epsilon(0.05));
  }

  TEST_CASE("jump apex stays above the ground line") {
    const Skeleton s = Skeleton::standard();
    Pose p = standing_pose(s);
    p.root_translation.y() += 0.4;
    const OrthoCamera cam;
    const Image img = render_frame(s, p, cam);
    CHECK(lowest_ink_row(img) < cam.ground_row());
  }

  TEST_CASE("PNG round trip") {
    const Skeleton s = Skeleton::standard();
    const Image img = render_frame(s, standing_pose(s));
    CHECK(decode_png(encode_png(img)) == img);
  }

  TEST_CASE("golden image") {
    const Skeleton s = Skeleton::standard();
    const auto golden = decode_png(io::read_bytes(std::string(KINOPLAN_FIXTURE_DIR) + "/render/standing.png"));
    CHECK(render_frame(s, standing_pose(s)) == golden);
  }
}
