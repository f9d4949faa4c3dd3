#include "bolting/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bolting {

Quat canonical(const Quat& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || n < 1e-12) throw std::invalid_argument("degenerate quaternion");
  // already unit to rounding: leave the bits alone so canonical() is idempotent
  const bool unit = std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon();
  Quat u = unit ? q : Quat(q.w() / n, q.x() / n, q.y() / n, q.z() / n);
  if (u.w() < 0.0) u.coeffs() = -u.coeffs();
  return u;
}

Pose::Pose() : position_(Vec3::Zero()), orientation_(Quat::Identity()) {}

Pose::Pose(const Vec3& position, const Quat& orientation)
    : position_(position), orientation_(canonical(orientation)) {
  if (!position_.allFinite()) throw std::invalid_argument("non-finite pose position");
}

Pose Pose::axis_angle(const Vec3& axis, double angle) {
  return rotation(Quat(Eigen::AngleAxisd(angle, axis.normalized())));
}

Pose Pose::from_array(std::span<const double> v) {
  if (v.size() != 7) throw std::invalid_argument("pose array needs 7 values");
  return Pose(Vec3(v[0], v[1], v[2]), Quat(v[3], v[4], v[5], v[6]));
}

std::array<double, 7> Pose::to_array() const {
  return {position_.x(),    position_.y(),    position_.z(),   orientation_.w(),
          orientation_.x(), orientation_.y(), orientation_.z()};
}

Pose Pose::inverse() const {
  const Quat qi = orientation_.conjugate();
  return Pose(-(qi * position_), qi);
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.position() + a.orientation() * b.position(), a.orientation() * b.orientation());
}

Pose inverse(const Pose& p) { return p.inverse(); }

Vec3 rotation_vector(const Quat& q_in) {
  const Quat q = canonical(q_in);
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) {
    // small-angle series: angle ~ 2 s / w
    return 2.0 * v / q.w();
  }
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

Quat quat_from_rotation_vector(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-12) {
    return canonical(Quat(1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z()));
  }
  return canonical(Quat(Eigen::AngleAxisd(angle, rv / angle)));
}

double angular_distance(const Quat& a, const Quat& b) {
  return rotation_vector(b * a.conjugate()).norm();
}

PoseError pose_error(const Pose& target, const Pose& current) {
  PoseError e;
  e.position = target.position() - current.position();
  e.orientation = rotation_vector(target.orientation() * current.orientation().conjugate());
  return e;
}

Wrench Wrench::from_array(std::span<const double> v) {
  if (v.size() != 6) throw std::invalid_argument("wrench array needs 6 values");
  return {Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
}

std::array<double, 6> Wrench::to_array() const {
  return {force.x(), force.y(), force.z(), torque.x(), torque.y(), torque.z()};
}

TimedTrajectory::TimedTrajectory(std::vector<TrajectorySample> samples)
    : samples_(std::move(samples)) {
  if (samples_.size() < 2) throw std::invalid_argument("trajectory needs at least 2 samples");
  if (samples_.front().t != 0.0) throw std::invalid_argument("trajectory must start at t = 0");
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].t > samples_[i - 1].t))
      throw std::invalid_argument("trajectory timestamps must strictly increase");
  }
}

Pose interpolate(const Pose& a, const Pose& b, double s) {
  const Vec3 p = a.position() + s * (b.position() - a.position());
  // Eigen's slerp flips the sign of the second argument when the dot
  // product is negative, so this is the shorter arc.
  const Quat q = a.orientation().slerp(s, b.orientation());
  return Pose(p, q);
}

Pose sample(const TimedTrajectory& traj, double t) {
  const auto& s = traj.samples();
  if (t <= 0.0) return s.front().pose;
  if (t >= traj.duration()) return s.back().pose;
  auto hi = std::upper_bound(s.begin(), s.end(), t,
                             [](double value, const TrajectorySample& x) { return value < x.t; });
  auto lo = std::prev(hi);
  const double u = (t - lo->t) / (hi->t - lo->t);
  return interpolate(lo->pose, hi->pose, u);
}

TimedTrajectory linear_trajectory(const Pose& start, const Pose& goal, double duration,
                                  int n_samples) {
  if (!(duration > 0.0)) throw NonPositiveDuration("trajectory duration must be positive");
  if (n_samples < 2) throw std::invalid_argument("trajectory needs at least 2 samples");
  std::vector<TrajectorySample> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const double s = static_cast<double>(i) / (n_samples - 1);
    const double t = (i == n_samples - 1) ? duration : s * duration;
    out.push_back({t, i == 0 ? start : (i == n_samples - 1 ? goal : interpolate(start, goal, s))});
  }
  return TimedTrajectory(std::move(out));
}

TimedTrajectory via_point_trajectory(std::span<const Pose> waypoints,
                                     std::span<const double> durations, int samples_per_segment) {
  if (waypoints.size() < 2 || durations.size() != waypoints.size() - 1)
    throw std::invalid_argument("via-point trajectory needs n waypoints and n-1 durations");
  if (samples_per_segment < 2) throw std::invalid_argument("segments need at least 2 samples");
  std::vector<TrajectorySample> out;
  out.push_back({0.0, waypoints.front()});
  double t0 = 0.0;
  for (std::size_t k = 0; k < durations.size(); ++k) {
    if (!(durations[k] > 0.0)) throw NonPositiveDuration("segment duration must be positive");
    for (int i = 1; i < samples_per_segment; ++i) {
      const double s = static_cast<double>(i) / (samples_per_segment - 1);
      const Pose p = (i == samples_per_segment - 1)
                         ? waypoints[k + 1]
                         : interpolate(waypoints[k], waypoints[k + 1], s);
      out.push_back({t0 + s * durations[k], p});
    }
    t0 += durations[k];
  }
  return TimedTrajectory(std::move(out));
}

}  // namespace bolting
