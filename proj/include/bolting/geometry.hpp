#pragma once

// Rigid-body poses, twists, wrenches and timed trajectories shared by every
// other module. Everything here is an immutable value type.

#include <Eigen/Geometry>

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace bolting {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Position (m) plus unit quaternion orientation. The quaternion is kept
/// normalized with w >= 0 so equal rotations compare equal.
class Pose {
 public:
  Pose();
  Pose(const Vec3& position, const Quat& orientation);

  static Pose identity() { return Pose(); }
  static Pose translation(const Vec3& p) { return Pose(p, Quat::Identity()); }
  static Pose translation(double x, double y, double z) { return translation(Vec3(x, y, z)); }
  static Pose rotation(const Quat& q) { return Pose(Vec3::Zero(), q); }
  static Pose axis_angle(const Vec3& axis, double angle);

  /// Flat wire layout [x, y, z, qw, qx, qy, qz].
  static Pose from_array(std::span<const double> values);
  std::array<double, 7> to_array() const;

  const Vec3& position() const { return position_; }
  const Quat& orientation() const { return orientation_; }
  Mat3 rotation_matrix() const { return orientation_.toRotationMatrix(); }
  Vec3 axis_z() const { return rotation_matrix().col(2); }

  Pose inverse() const;
  Vec3 transform_point(const Vec3& p) const { return position_ + orientation_ * p; }

 private:
  Vec3 position_;
  Quat orientation_;
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// Canonical unit quaternion (normalized, w >= 0). Throws on zero or non-finite input.
Quat canonical(const Quat& q);

/// Rotation vector (axis * angle, angle in [0, pi]) of a rotation.
Vec3 rotation_vector(const Quat& q);
Quat quat_from_rotation_vector(const Vec3& rv);
/// Smallest rotation angle taking a to b, in [0, pi].
double angular_distance(const Quat& a, const Quat& b);

struct PoseError {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 v;
    v << position, orientation;
    return v;
  }
};

/// position: target - current; orientation: rotation vector of
/// target.orientation * current.orientation^-1 (base-frame).
PoseError pose_error(const Pose& target, const Pose& current);

struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  bool is_finite() const { return linear.allFinite() && angular.allFinite(); }
  Vec6 stacked() const {
    Vec6 v;
    v << linear, angular;
    return v;
  }
  static Twist from_stacked(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
};

struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();

  bool is_finite() const { return force.allFinite() && torque.allFinite(); }
  Vec6 stacked() const {
    Vec6 v;
    v << force, torque;
    return v;
  }
  static Wrench from_stacked(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }

  /// Flat wire layout [fx, fy, fz, tx, ty, tz].
  static Wrench from_array(std::span<const double> values);
  std::array<double, 6> to_array() const;

  /// Re-express both vectors in the parent frame of `frame` (no moment shift).
  Wrench rotated(const Quat& frame) const { return {frame * force, frame * torque}; }

  bool operator==(const Wrench&) const = default;
};

class NonPositiveDuration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrajectorySample {
  double t = 0.0;
  Pose pose;
};

/// Poses with a timing law. Timestamps start at 0 and strictly increase.
class TimedTrajectory {
 public:
  explicit TimedTrajectory(std::vector<TrajectorySample> samples);

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  double duration() const { return samples_.back().t; }
  const Pose& start() const { return samples_.front().pose; }
  const Pose& goal() const { return samples_.back().pose; }

 private:
  std::vector<TrajectorySample> samples_;
};

/// Linear position / shortest-arc slerp between the bracketing samples.
/// Times before 0 clamp to the start, times past the end hold the goal.
Pose sample(const TimedTrajectory& traj, double t);

/// Pose interpolation helper: linear position, shortest-arc slerp orientation.
Pose interpolate(const Pose& a, const Pose& b, double s);

TimedTrajectory linear_trajectory(const Pose& start, const Pose& goal, double duration,
                                  int n_samples);

/// Piecewise-linear path through `waypoints`; segment i lasts durations[i].
TimedTrajectory via_point_trajectory(std::span<const Pose> waypoints,
                                     std::span<const double> durations,
                                     int samples_per_segment = 2);

}  // namespace bolting
