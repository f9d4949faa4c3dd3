#include "bolting/kinematics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace bolting;
constexpr double pi = std::numbers::pi;

namespace {

const Joints kHome = (Joints() << 0, -pi / 2, pi / 2, -pi / 2, -pi / 2, 0).finished();

oracle::M4 oracle_fk(const RobotModel& m, const Joints& q) {
  oracle::M4 t = oracle::M4::Identity();
  for (int i = 0; i < 6; ++i) {
    const DhRow& r = m.dh[i];
    t = t * oracle::dh(r.a, r.d, r.alpha, q[i] + r.theta_offset);
  }
  return t * oracle::homogeneous(m.tool_transform.rotation_matrix(), m.tool_transform.position());
}

RobotModel planar_model() {
  RobotModel m;
  m.dh = {DhRow{0.4, 0.0, 0.0, 0.0}, DhRow{0.3, 0.0, 0.0, 0.0}, DhRow{0.0, 0.0, 0.0, 0.0},
          DhRow{0.0, 0.0, 0.0, 0.0}, DhRow{0.0, 0.0, 0.0, 0.0}, DhRow{0.0, 0.0, 0.0, 0.0}};
  m.tool_transform = Pose::identity();
  return m;
}

Joints random_joints(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-pi, pi);
  std::uniform_real_distribution<double> elbow(-2.8, 2.8);
  Joints q;
  for (int i = 0; i < 6; ++i) q[i] = u(rng);
  q[2] = elbow(rng);
  return q;
}

}  // namespace

TEST_CASE("degenerate chain reduces to the tool transform") {
  RobotModel m;
  m.tool_transform = Pose(Vec3(0.1, 0.2, 0.3), Quat(Eigen::AngleAxisd(0.5, Vec3::UnitX())));
  const Pose p = forward_kinematics(m, Joints::Zero());
  CHECK((p.position() - m.tool_transform.position()).norm() < 1e-15);
  CHECK(angular_distance(p.orientation(), m.tool_transform.orientation()) < 1e-12);
}

TEST_CASE("UR5e FK matches an element-wise DH product") {
  const RobotModel m = RobotModel::ur5e();
  const oracle::M4 t = oracle_fk(m, kHome);
  const Pose p = forward_kinematics(m, kHome);
  CHECK((p.position() - t.block<3, 1>(0, 3)).norm() < 1e-9);
  CHECK((p.rotation_matrix() - t.block<3, 3>(0, 0)).norm() < 1e-9);

  std::mt19937_64 rng(29);
  for (int i = 0; i < 200; ++i) {
    const Joints q = random_joints(rng);
    const oracle::M4 o = oracle_fk(m, q);
    const Pose f = forward_kinematics(m, q);
    CHECK((f.position() - o.block<3, 1>(0, 3)).norm() < 1e-9);
    CHECK((f.rotation_matrix() - o.block<3, 3>(0, 0)).norm() < 1e-9);
  }
}

TEST_CASE("rotating joint 1 by pi mirrors a planar arm") {
  const RobotModel m = planar_model();
  Joints q = Joints::Zero();
  q[1] = 0.7;
  const Vec3 a = forward_kinematics(m, q).position();
  q[0] += pi;
  const Vec3 b = forward_kinematics(m, q).position();
  CHECK(b.x() == doctest::Approx(-a.x()).epsilon(1e-12));
  CHECK(b.y() == doctest::Approx(-a.y()).epsilon(1e-12));
  CHECK(b.z() == doctest::Approx(a.z()));
}

TEST_CASE("geometric Jacobian matches finite differences") {
  const RobotModel m = RobotModel::ur5e();
  std::mt19937_64 rng(31);
  for (int k = 0; k < 20; ++k) {
    const Joints q = random_joints(rng);
    const Jacobian j = tip_jacobian(m, q);
    const Pose p0 = forward_kinematics(m, q);
    for (int i = 0; i < 6; ++i) {
      Joints dq = q;
      const double h = 1e-7;
      dq[i] += h;
      const PoseError e = pose_error(forward_kinematics(m, dq), p0);
      CHECK((j.block<3, 1>(0, i) - e.position / h).norm() < 1e-5);
      CHECK((j.block<3, 1>(3, i) - e.orientation / h).norm() < 1e-5);
    }
  }
}

TEST_CASE("IK fixed point needs no iterations") {
  const RobotModel m = RobotModel::ur5e();
  const IkResult r = solve_ik(m, forward_kinematics(m, kHome), kHome);
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK((r.joints - kHome).norm() == 0.0);
}

TEST_CASE("IK round trip over 1000 random reachable targets") {
  const RobotModel m = RobotModel::ur5e();
  std::mt19937_64 rng(37);
  std::normal_distribution<double> noise(0.0, 0.05);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const Joints q_star = random_joints(rng);
    const Pose target = forward_kinematics(m, q_star);
    Joints seed = q_star;
    for (int j = 0; j < 6; ++j) seed[j] += noise(rng);
    const Joints q = inverse_kinematics(m, target, seed);
    const PoseError e = pose_error(target, forward_kinematics(m, q));
    if (e.position.norm() > 1e-4 || e.orientation.norm() > 1e-3) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("IK errors") {
  const RobotModel m = RobotModel::ur5e();
  CHECK_THROWS_AS(inverse_kinematics(m, Pose::translation(10, 0, 0), kHome), NoConvergence);

  // a target on the far side of a narrowed joint range
  RobotModel narrow = m;
  narrow.joint_limits[0] = JointLimit{-0.1, 0.1};
  Joints q = kHome;
  q[0] = 1.0;
  const Pose target = forward_kinematics(m, q);
  CHECK_THROWS_AS(inverse_kinematics(narrow, target, kHome), JointLimitViolation);
}

TEST_CASE("IK respects joint limits") {
  RobotModel m = RobotModel::ur5e();
  m.joint_limits[5] = JointLimit{-0.2, 0.2};
  Joints q = kHome;
  q[5] = 0.5;
  const IkResult r = solve_ik(m, forward_kinematics(RobotModel::ur5e(), q), kHome);
  CHECK(r.joints[5] <= 0.2);
  CHECK(r.joints[5] >= -0.2);
  CHECK_FALSE(r.converged);
}

TEST_CASE("segment distance agrees with dense sampling") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p0(u(rng), u(rng), u(rng)), p1(u(rng), u(rng), u(rng));
    const Vec3 q0(u(rng), u(rng), u(rng)), q1(u(rng), u(rng), u(rng));
    const double d = segment_distance(p0, p1, q0, q1);
    const double o = oracle::sampled_segment_distance(p0, p1, q0, q1, 2000);
    CHECK(d <= o + 1e-12);
    CHECK(o - d < 2e-3);
  }
  // parallel and degenerate segments
  CHECK(segment_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)) ==
        doctest::Approx(1.0));
  CHECK(segment_distance(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 2, 0), Vec3(0, 2, 0)) ==
        doctest::Approx(2.0));
}

TEST_CASE("self-collision: home is free, a folded elbow collides") {
  const RobotModel m = RobotModel::ur5e();
  CHECK_FALSE(check_self_collision(m, kHome));
  CHECK(self_collision_clearance(m, kHome) > 0.0);

  const RobotModel p = [] {
    RobotModel r;
    // planar chain with a vertical base post; every link has length
    r.dh = {DhRow{0.0, 0.3, pi / 2, 0.0}, DhRow{0.4, 0.0, 0.0, 0.0}, DhRow{0.4, 0.0, 0.0, 0.0},
            DhRow{0.15, 0.0, 0.0, 0.0}, DhRow{0.15, 0.0, 0.0, 0.0}, DhRow{0.15, 0.0, 0.0, 0.0}};
    r.tool_transform = Pose::identity();
    return r;
  }();
  Joints folded = Joints::Zero();
  folded[1] = pi / 2;   // upper arm straight up
  folded[2] = pi;       // forearm folded back down onto it
  CHECK(check_self_collision(p, folded));
  Joints open = Joints::Zero();
  CHECK_FALSE(check_self_collision(p, open));
}

TEST_CASE("self-collision agrees with a dense-sampling oracle") {
  const RobotModel m = RobotModel::ur5e();
  std::mt19937_64 rng(43);
  int compared = 0, colliding = 0;
  for (int k = 0; k < 400; ++k) {
    const Joints q = random_joints(rng);
    const auto pts = link_points(m, q);
    double clearance = 1e300;
    for (int i = 0; i < 7; ++i) {
      for (int j = i + 2; j < 7; ++j) {
        const double d = oracle::sampled_segment_distance(pts[i], pts[i + 1], pts[j], pts[j + 1], 300);
        clearance = std::min(clearance, d - m.link_radii[i] - m.link_radii[j]);
      }
    }
    if (std::abs(clearance) <= 0.005) continue;  // inside the agreement margin
    ++compared;
    if (clearance < 0) ++colliding;
    CHECK(check_self_collision(m, q) == (clearance < 0.0));
  }
  CHECK(compared > 300);
  CHECK(colliding > 0);
}
