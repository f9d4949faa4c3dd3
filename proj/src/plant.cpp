#include "bolting/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bolting {

double BoltModel::head_circumradius() const {
  // hexagon across flats -> across corners
  return 0.5 * head_across_flats / std::cos(std::numbers::pi / 6.0);
}

void BoltModel::validate() const {
  if (!(free_run_angle >= 0.0)) throw std::invalid_argument("free_run_angle must be >= 0");
  if (!(thread_stiffness > 0.0)) throw std::invalid_argument("thread_stiffness must be > 0");
  if (!(target_torque > 0.0)) throw std::invalid_argument("target_torque must be > 0");
  if (!(head_across_flats > 0.0) || !(head_height > 0.0))
    throw std::invalid_argument("bolt head dimensions must be > 0");
  if (!(release_back_angle >= 0.0)) throw std::invalid_argument("release_back_angle must be >= 0");
}

void ContactParams::validate() const {
  const double v[] = {normal_stiffness,   normal_damping, lateral_stiffness, torsional_friction,
                      capture_radius,     capture_angle,  socket_wall};
  for (double x : v) {
    if (!(x > 0.0)) throw std::invalid_argument("contact parameters must be positive");
  }
}

PlantState PlantState::at_rest(const PlantWorld& world, const Joints& joints,
                               const FaultInjection& faults, std::uint64_t noise_seed) {
  PlantState s;
  s.joints = joints;
  s.socket_pose = forward_kinematics(world.robot, joints);
  s.noise_state = noise_seed;
  BoltModel physical = world.bolt;
  physical.true_pose = physical_bolt_pose(world.bolt, faults);
  const ContactResult c = compute_contact_wrench(s.socket_pose, physical, world.contact);
  s.engagement_depth = c.engagement_depth;
  s.normal_force = c.normal_force;
  s.contact_wrench = c.wrench;
  s.bolt_torque = thread_torque(world.bolt, s.bolt_rotation);
  return s;
}

double thread_torque(const BoltModel& bolt, double bolt_rotation) {
  return std::max(0.0, bolt.thread_stiffness * (bolt_rotation - bolt.free_run_angle));
}

Pose physical_bolt_pose(const BoltModel& bolt, const FaultInjection& faults) {
  return compose(bolt.true_pose, faults.bolt_misalignment);
}

Pose identify_bolt(const BoltModel& bolt, const FaultInjection& faults) {
  return compose(faults.identified_pose_offset, physical_bolt_pose(bolt, faults));
}

double lateral_error(const Pose& socket_pose, const Pose& bolt_pose) {
  const Vec3 r = bolt_pose.orientation().conjugate() * (socket_pose.position() - bolt_pose.position());
  return std::hypot(r.x(), r.y());
}

ContactResult compute_contact_wrench(const Pose& socket_pose, const BoltModel& bolt,
                                     const ContactParams& params, const Twist& socket_twist) {
  ContactResult out;
  const Pose& b = bolt.true_pose;
  const Quat qb_inv = b.orientation().conjugate();
  const Vec3 r = qb_inv * (socket_pose.position() - b.position());
  const Vec3 v = qb_inv * socket_twist.linear;
  const Vec3 lateral(r.x(), r.y(), 0.0);
  out.lateral_offset = lateral.norm();

  const double top = 0.5 * bolt.head_height;
  const double flange = -0.5 * bolt.head_height;
  const double tilt = std::acos(std::clamp(socket_pose.axis_z().dot(b.axis_z()), -1.0, 1.0));
  const bool captured = out.lateral_offset <= params.capture_radius && tilt <= params.capture_angle;

  auto normal_law = [&](double penetration) {
    // damping only while pressing further in
    const double rate = -v.z();
    return std::max(0.0, params.normal_stiffness * penetration + params.normal_damping * rate);
  };

  Vec3 force_bolt = Vec3::Zero();
  if (captured) {
    out.engagement_depth = std::max(0.0, top - r.z());
    out.engaged = out.engagement_depth > 0.0;
    if (out.engaged) {
      force_bolt -= params.lateral_stiffness * lateral;
      const double bottom_out = flange - r.z();
      if (bottom_out > 0.0) out.normal_force = normal_law(bottom_out);
    }
  } else {
    // the socket rim lands on the head top unless it clears the head entirely
    const double socket_outer = bolt.head_circumradius() + params.socket_wall;
    const double surface = out.lateral_offset <= bolt.head_circumradius() + socket_outer ? top : flange;
    const double penetration = surface - r.z();
    if (penetration > 0.0) out.normal_force = normal_law(penetration);
  }
  force_bolt.z() += out.normal_force;

  // bolt frame -> base frame -> socket frame
  const Vec3 force_socket = socket_pose.orientation().conjugate() * (b.orientation() * force_bolt);
  out.wrench = Wrench{force_socket, Vec3::Zero()};
  return out;
}

namespace {

// splitmix64: stateless-friendly generator so noise is part of PlantState.
std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double uniform_pm1(std::uint64_t& state) {
  return 2.0 * (static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace

PlantState step(const PlantState& state, const Pose& commanded_pose, double driver_velocity,
                const FaultInjection& faults, double dt, const PlantWorld& world) {
  if (!(dt > 0.0 && dt <= 0.01)) throw std::invalid_argument("plant dt must be in (0, 0.01]");
  PlantState next = state;

  // (1) kinematic arm: joints move toward the IK solution, rate limited.
  // A tripped protective stop freezes the arm.
  if (!state.safety_tripped) {
    const IkResult ik = solve_ik(world.robot, commanded_pose, state.joints);
    Joints dq = ik.joints - state.joints;
    const double limit = world.robot.max_joint_speed * dt;
    const double big = dq.cwiseAbs().maxCoeff();
    if (big > limit) dq *= limit / big;
    next.joints = state.joints + dq;
  }
  next.socket_pose = forward_kinematics(world.robot, next.joints);
  next.socket_twist.linear = (next.socket_pose.position() - state.socket_pose.position()) / dt;
  const Vec3 rot_increment = rotation_vector(next.socket_pose.orientation() *
                                             state.socket_pose.orientation().conjugate());
  next.socket_twist.angular = rot_increment / dt;

  // (2) contact against the physical bolt
  BoltModel physical = world.bolt;
  physical.true_pose = physical_bolt_pose(world.bolt, faults);
  const ContactResult contact =
      compute_contact_wrench(next.socket_pose, physical, world.contact, next.socket_twist);
  next.engagement_depth = contact.engagement_depth;
  next.normal_force = contact.normal_force;

  // (3) bolt rotation: driver output plus wrist rotation about the bolt
  // axis are transmitted while the socket is engaged
  const double drive = faults.driver_dead ? 0.0 : driver_velocity * dt;
  next.driver_angle = state.driver_angle + drive;
  if (contact.engaged) {
    double turn = drive + rot_increment.dot(physical.true_pose.axis_z());
    if (turn < 0.0 && state.bolt_torque > world.contact.torsional_friction) turn = 0.0;
    next.bolt_rotation =
        std::max(state.bolt_rotation + turn, -world.bolt.release_back_angle);
    next.bolt_torque = thread_torque(world.bolt, next.bolt_rotation);
  }

  Wrench measured = contact.wrench;
  if (world.noise.force_amplitude > 0.0 || world.noise.torque_amplitude > 0.0) {
    for (int i = 0; i < 3; ++i) measured.force[i] += world.noise.force_amplitude * uniform_pm1(next.noise_state);
    for (int i = 0; i < 3; ++i) measured.torque[i] += world.noise.torque_amplitude * uniform_pm1(next.noise_state);
  }
  next.contact_wrench = measured;

  // (4) protective stop latch
  SafetyMonitor monitor = world.safety;
  monitor.tripped = state.safety_tripped;
  next.safety_tripped = safety_check(monitor, measured).tripped;
  next.self_collision = state.self_collision || check_self_collision(world.robot, next.joints);

  // (5)
  next.time = state.time + dt;
  return next;
}

PlantState reset_safety(const PlantState& state) {
  PlantState s = state;
  SafetyMonitor m;
  m.tripped = s.safety_tripped;
  s.safety_tripped = safety_reset(m, true).tripped;
  return s;
}

}  // namespace bolting
