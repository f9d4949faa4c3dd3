#include "bolting/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bolting {

namespace {

Eigen::Isometry3d dh_transform(const DhRow& row, double q) {
  const double th = q + row.theta_offset;
  const double ct = std::cos(th), st = std::sin(th);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() << ct, -st * ca, st * sa,
                st, ct * ca, -ct * sa,
                0.0, sa, ca;
  t.translation() << row.a * ct, row.a * st, row.d;
  return t;
}

Eigen::Isometry3d to_isometry(const Pose& p) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = p.rotation_matrix();
  t.translation() = p.position();
  return t;
}

Joints clamp_to_limits(const RobotModel& model, Joints q) {
  for (int i = 0; i < 6; ++i) {
    q[i] = std::clamp(q[i], model.joint_limits[i].min, model.joint_limits[i].max);
  }
  return q;
}

}  // namespace

RobotModel RobotModel::ur5e() {
  constexpr double pi = std::numbers::pi;
  RobotModel m;
  m.dh = {DhRow{0.0, 0.1625, pi / 2, 0.0},  DhRow{-0.425, 0.0, 0.0, 0.0},
          DhRow{-0.3922, 0.0, 0.0, 0.0},    DhRow{0.0, 0.1333, pi / 2, 0.0},
          DhRow{0.0, 0.0997, -pi / 2, 0.0}, DhRow{0.0, 0.0996, 0.0, 0.0}};
  m.joint_limits.fill(JointLimit{-2 * pi, 2 * pi});
  m.joint_limits[2] = JointLimit{-pi, pi};
  m.tool_transform = Pose(Vec3(0.0, 0.0, 0.15), Quat(0.0, 1.0, 0.0, 0.0));
  m.max_joint_speed = pi;
  return m;
}

void RobotModel::validate() const {
  for (const auto& l : joint_limits) {
    if (!(l.min < l.max)) throw std::invalid_argument("joint limit min must be < max");
  }
  if (!(max_joint_speed > 0.0)) throw std::invalid_argument("max_joint_speed must be > 0");
  for (double r : link_radii) {
    if (!(r >= 0.0)) throw std::invalid_argument("link radii must be >= 0");
  }
}

Pose forward_kinematics(const RobotModel& model, const Joints& q) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (int i = 0; i < 6; ++i) t = t * dh_transform(model.dh[i], q[i]);
  t = t * to_isometry(model.tool_transform);
  return Pose(t.translation(), Quat(t.linear()));
}

std::array<Vec3, 8> link_points(const RobotModel& model, const Joints& q) {
  std::array<Vec3, 8> pts;
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  pts[0] = t.translation();
  for (int i = 0; i < 6; ++i) {
    t = t * dh_transform(model.dh[i], q[i]);
    pts[i + 1] = t.translation();
  }
  pts[7] = (t * to_isometry(model.tool_transform)).translation();
  return pts;
}

Jacobian tip_jacobian(const RobotModel& model, const Joints& q) {
  std::array<Vec3, 6> axes, origins;
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (int i = 0; i < 6; ++i) {
    axes[i] = t.linear().col(2);
    origins[i] = t.translation();
    t = t * dh_transform(model.dh[i], q[i]);
  }
  const Vec3 tip = (t * to_isometry(model.tool_transform)).translation();
  Jacobian j;
  for (int i = 0; i < 6; ++i) {
    j.block<3, 1>(0, i) = axes[i].cross(tip - origins[i]);
    j.block<3, 1>(3, i) = axes[i];
  }
  return j;
}

IkResult solve_ik(const RobotModel& model, const Pose& target, const Joints& seed,
                  const IkOptions& opt) {
  IkResult r;
  Joints q = clamp_to_limits(model, seed);
  const Eigen::Matrix<double, 6, 6> damping2 =
      opt.damping * opt.damping * Eigen::Matrix<double, 6, 6>::Identity();

  for (int it = 0;; ++it) {
    const PoseError e = pose_error(target, forward_kinematics(model, q));
    r.position_error = e.position.norm();
    r.orientation_error = e.orientation.norm();
    r.iterations = it;
    if (r.position_error < opt.tight_position_tol &&
        r.orientation_error < opt.tight_orientation_tol) {
      break;
    }
    if (it >= opt.max_iterations) break;

    const Jacobian j = tip_jacobian(model, q);
    const Vec6 err = e.stacked();
    Joints dq = j.transpose() * (j * j.transpose() + damping2).ldlt().solve(err);
    const double big = dq.cwiseAbs().maxCoeff();
    if (big > opt.max_step) dq *= opt.max_step / big;

    const Joints unclamped = q + dq;
    const Joints next = clamp_to_limits(model, unclamped);
    r.limit_active = (next - unclamped).cwiseAbs().maxCoeff() > 0.0;
    if ((next - q).cwiseAbs().maxCoeff() < 1e-15) break;  // stalled
    q = next;
  }
  r.joints = q;
  r.converged = r.position_error <= opt.position_tol && r.orientation_error <= opt.orientation_tol;
  return r;
}

Joints inverse_kinematics(const RobotModel& model, const Pose& target, const Joints& seed,
                          const IkOptions& options) {
  const IkResult r = solve_ik(model, target, seed, options);
  if (r.converged) return r.joints;
  if (r.limit_active) throw JointLimitViolation("IK solution requires exceeding a joint limit");
  throw NoConvergence("IK did not converge");
}

double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  // Closest points between two segments (clamped parametric form).
  const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  constexpr double eps = 1e-18;
  double s = 0.0, t = 0.0;
  if (a <= eps && e <= eps) return r.norm();
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + d1 * s) - (q0 + d2 * t)).norm();
}

double self_collision_clearance(const RobotModel& model, const Joints& q) {
  const auto pts = link_points(model, q);
  double clearance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 7; ++i) {
    for (int j = i + 2; j < 7; ++j) {
      const double d = segment_distance(pts[i], pts[i + 1], pts[j], pts[j + 1]);
      clearance = std::min(clearance, d - model.link_radii[i] - model.link_radii[j]);
    }
  }
  return clearance;
}

bool check_self_collision(const RobotModel& model, const Joints& q) {
  return self_collision_clearance(model, q) < 0.0;
}

}  // namespace bolting
