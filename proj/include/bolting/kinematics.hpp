#pragma once

// Serial 6-DoF arm kinematics: standard DH forward kinematics, damped
// least-squares inverse kinematics and a coarse capsule self-collision test.

#include "bolting/geometry.hpp"

#include <array>
#include <stdexcept>

namespace bolting {

using Joints = Eigen::Matrix<double, 6, 1>;
using Jacobian = Eigen::Matrix<double, 6, 6>;

struct DhRow {
  double a = 0.0;             // m
  double d = 0.0;             // m
  double alpha = 0.0;         // rad
  double theta_offset = 0.0;  // rad
};

struct JointLimit {
  double min = -2.0 * 3.14159265358979323846;
  double max = 2.0 * 3.14159265358979323846;
};

struct RobotModel {
  std::array<DhRow, 6> dh{};
  std::array<JointLimit, 6> joint_limits{};
  Pose tool_transform;            // flange -> socket tip
  double max_joint_speed = 3.14159265358979323846;  // rad/s
  /// Capsule radius per link segment: base, upper arm, forearm, wrist 1,
  /// wrist 2, wrist 3 and tool (flange -> socket tip).
  std::array<double, 7> link_radii{0.06, 0.05, 0.045, 0.04, 0.04, 0.035, 0.03};

  /// Published UR5e DH table with a 150 mm bolt-driver tool whose tip frame
  /// z-axis points back toward the flange.
  static RobotModel ur5e();
  void validate() const;
};

/// Socket-tip pose: DH chain composed with the tool transform.
Pose forward_kinematics(const RobotModel& model, const Joints& q);

/// Origins of base, DH frames 1..6 and the socket tip (8 points).
std::array<Vec3, 8> link_points(const RobotModel& model, const Joints& q);

/// Geometric Jacobian at the socket tip, base-frame [linear; angular].
Jacobian tip_jacobian(const RobotModel& model, const Joints& q);

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JointLimitViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IkOptions {
  int max_iterations = 500;
  double damping = 1e-2;
  double max_step = 0.3;  // rad per iteration
  /// Convergence is declared below these; success requires the looser
  /// acceptance tolerances.
  double tight_position_tol = 1e-10;
  double tight_orientation_tol = 1e-9;
  double position_tol = 1e-4;
  double orientation_tol = 1e-3;
};

struct IkResult {
  Joints joints = Joints::Zero();
  int iterations = 0;
  double position_error = 0.0;
  double orientation_error = 0.0;
  bool converged = false;
  bool limit_active = false;
};

/// Best-effort damped least squares; never throws on numerical failure.
IkResult solve_ik(const RobotModel& model, const Pose& target, const Joints& seed,
                  const IkOptions& options = {});

/// Throws NoConvergence or JointLimitViolation when the target is not met.
Joints inverse_kinematics(const RobotModel& model, const Pose& target, const Joints& seed,
                          const IkOptions& options = {});

/// Shortest distance between segments [p0,p1] and [q0,q1].
double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

/// Smallest surface clearance over non-adjacent link capsules (negative when
/// they overlap).
double self_collision_clearance(const RobotModel& model, const Joints& q);

bool check_self_collision(const RobotModel& model, const Joints& q);

}  // namespace bolting
