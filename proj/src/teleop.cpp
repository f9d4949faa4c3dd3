#include "bolting/teleop.hpp"

#include <algorithm>
#include <cmath>

namespace bolting {

void TeleopMapping::validate() const {
  if (!(motion_scale > 0.0)) throw std::invalid_argument("motion_scale must be > 0");
  if (filter_window < 1) throw std::invalid_argument("filter_window must be >= 1");
  if (!(engage_angle_tolerance >= 0.0))
    throw std::invalid_argument("engage_angle_tolerance must be >= 0");
}

void FeedbackParams::validate() const {
  if ((feedback_stiffness.array() < 0.0).any() || (feedback_damping.array() < 0.0).any())
    throw std::invalid_argument("feedback gains must be non-negative");
  if (!(force_cap > 0.0)) throw std::invalid_argument("force_cap must be > 0");
}

Pose filter_device(std::span<const InputDeviceSample> samples, int window) {
  if (samples.empty()) throw std::invalid_argument("filter_device needs at least one sample");
  const std::size_t n = std::min<std::size_t>(samples.size(), static_cast<std::size_t>(std::max(window, 1)));
  const auto recent = samples.subspan(samples.size() - n);

  Vec3 p = Vec3::Zero();
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  const Quat& ref = recent.front().pose.orientation();
  for (const auto& s : recent) {
    p += s.pose.position();
    const Quat& qi = s.pose.orientation();
    const double sign = ref.dot(qi) < 0.0 ? -1.0 : 1.0;
    q += sign * Eigen::Vector4d(qi.w(), qi.x(), qi.y(), qi.z());
  }
  p /= static_cast<double>(n);
  return Pose(p, Quat(q[0], q[1], q[2], q[3]));
}

Quat mapped_orientation(const Quat& device, const TeleopMapping& mapping) {
  return mapping.camera_alignment * device;
}

bool try_engage(const Pose& device_pose, const Pose& socket_pose, const TeleopMapping& mapping) {
  const Quat mapped = mapped_orientation(device_pose.orientation(), mapping);
  return angular_distance(mapped, socket_pose.orientation()) <= mapping.engage_angle_tolerance;
}

Pose map_motion(const Pose& filtered_device, const Pose& anchor_device, const Pose& anchor_socket,
                const TeleopMapping& mapping) {
  const Quat& rc = mapping.camera_alignment;
  const Vec3 dp = rc * (filtered_device.position() - anchor_device.position());
  const Quat dq_device = filtered_device.orientation() * anchor_device.orientation().conjugate();
  const Quat dq_camera = rc * dq_device * rc.conjugate();
  return Pose(anchor_socket.position() + mapping.motion_scale * dp,
              dq_camera * anchor_socket.orientation());
}

Pose map_motion(const TeleopState& state, const Pose& filtered_device, const TeleopMapping& mapping) {
  if (!state.engaged) throw NotEngaged("teleop is not engaged");
  return map_motion(filtered_device, state.anchor_device, state.anchor_socket, mapping);
}

TeleopTick teleop_tick(const TeleopState& state, const InputDeviceSample& sample,
                       const Pose& socket_pose, const Pose& held_reference,
                       const TeleopMapping& mapping) {
  TeleopTick out;
  TeleopState& s = out.state;
  s = state;
  s.window.push_back(sample);
  while (s.window.size() > static_cast<std::size_t>(mapping.filter_window)) s.window.pop_front();

  if (!sample.clutch) {
    // indexing: the next engagement re-anchors wherever the device is then
    s.engaged = false;
    return out;
  }
  const std::vector<InputDeviceSample> buf(s.window.begin(), s.window.end());
  const Pose filtered = filter_device(buf, mapping.filter_window);
  if (!s.engaged) {
    if (!try_engage(filtered, socket_pose, mapping)) return out;
    s.engaged = true;
    s.anchor_device = filtered;
    s.anchor_socket = held_reference;
  }
  out.reference = map_motion(s, filtered, mapping);
  s.last_reference = out.reference;
  return out;
}

Wrench feedback_force(const AdmittanceState& admittance, const FeedbackParams& params,
                      const Quat& camera_alignment) {
  const Vec6 e = pose_error(admittance.last_reference, admittance.virtual_pose).stacked();
  // the reference is held between ticks, so the error rate is -twist
  const Vec6 e_dot = -admittance.virtual_twist.stacked();
  const Vec6 w = params.feedback_stiffness.cwiseProduct(e) + params.feedback_damping.cwiseProduct(e_dot);
  Wrench device = Wrench::from_stacked(w).rotated(camera_alignment.conjugate());
  const double f = device.force.norm();
  if (f > params.force_cap) {
    const double k = params.force_cap / f;
    device.force *= k;
    device.torque *= k;
  }
  return device;
}

}  // namespace bolting
