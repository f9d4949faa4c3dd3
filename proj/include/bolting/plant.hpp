#pragma once

// Deterministic fixed-step world: kinematic follower arm with joint-rate
// limits, a bolt on a flange, penalty socket/bolt contact, a piecewise-linear
// thread torque law, and fault injection.

#include "bolting/compliance.hpp"
#include "bolting/geometry.hpp"
#include "bolting/kinematics.hpp"

#include <cstdint>
#include <numbers>

namespace bolting {

/// Bolt head geometry and thread law. The pose origin is the head center,
/// the z-axis points out of the head; the head top face sits at +height/2
/// and the flange plane at -height/2.
struct BoltModel {
  Pose true_pose;
  double head_across_flats = 0.013;  // m
  double head_height = 0.008;        // m
  double free_run_angle = 2.0 * std::numbers::pi;  // rad
  double thread_stiffness = 4.0;     // N*m/rad
  double target_torque = 8.0;        // N*m
  double release_back_angle = 0.35;  // rad

  double head_circumradius() const;
  void validate() const;
};

struct ContactParams {
  double normal_stiffness = 2.0e4;   // N/m
  double normal_damping = 100.0;     // N*s/m
  double lateral_stiffness = 5.0e3;  // N/m
  /// Thread friction: a loosening rotation only turns the bolt while the
  /// bolt torque is at or below this value.
  double torsional_friction = 0.5;   // N*m
  double capture_radius = 0.002;     // m
  double capture_angle = 0.05;       // rad
  double socket_wall = 0.004;        // m

  void validate() const;
};

struct FaultInjection {
  Pose identified_pose_offset;  // vision fault, identity when healthy
  bool driver_dead = false;     // bolt-driver hardware fault
  Pose bolt_misalignment;       // applied to the bolt's true pose
};

/// Optional zero-mean uniform noise on the force/torque reading.
struct SensorNoise {
  double force_amplitude = 0.0;   // N
  double torque_amplitude = 0.0;  // N*m
};

struct PlantWorld {
  RobotModel robot = RobotModel::ur5e();
  BoltModel bolt;
  ContactParams contact;
  SafetyMonitor safety;
  SensorNoise noise;
};

struct PlantState {
  Joints joints = Joints::Zero();
  Pose socket_pose;
  Twist socket_twist;           // finite difference over the last step
  double bolt_rotation = 0.0;   // rad, cumulative
  double bolt_torque = 0.0;     // N*m
  double driver_angle = 0.0;    // rad, driver output encoder
  double engagement_depth = 0.0;  // m
  double normal_force = 0.0;    // N along the bolt axis, noise-free
  Wrench contact_wrench;        // tool frame, as read by the wrist sensor
  bool safety_tripped = false;
  bool self_collision = false;
  double time = 0.0;
  std::uint64_t noise_state = 0;

  /// Consistent state at rest on `joints`, bolt untouched.
  static PlantState at_rest(const PlantWorld& world, const Joints& joints,
                            const FaultInjection& faults = {}, std::uint64_t noise_seed = 0);
};

struct ContactResult {
  Wrench wrench;                 // on the socket, socket-tip frame
  double engagement_depth = 0.0;
  bool engaged = false;
  double normal_force = 0.0;     // along the bolt axis, >= 0
  double lateral_offset = 0.0;   // m from the bolt axis
};

/// Penalty contact between the socket tip and the bolt at `bolt.true_pose`.
/// `socket_twist` only feeds the normal damping term.
ContactResult compute_contact_wrench(const Pose& socket_pose, const BoltModel& bolt,
                                     const ContactParams& params,
                                     const Twist& socket_twist = Twist{});

/// 0 through free run, then thread_stiffness * (rotation - free_run_angle).
double thread_torque(const BoltModel& bolt, double bolt_rotation);

/// Where the bolt physically is: true pose with the misalignment applied.
Pose physical_bolt_pose(const BoltModel& bolt, const FaultInjection& faults);

/// Vision stub: identified_pose_offset * (true_pose * bolt_misalignment).
Pose identify_bolt(const BoltModel& bolt, const FaultInjection& faults);

/// Distance of the socket tip from the physical bolt axis.
double lateral_error(const Pose& socket_pose, const Pose& bolt_pose);

/// Advances the world by dt (0 < dt <= 0.01). Pure: identical inputs give
/// identical outputs.
PlantState step(const PlantState& state, const Pose& commanded_pose, double driver_velocity,
                const FaultInjection& faults, double dt, const PlantWorld& world);

/// Operator-acknowledged reset of the protective stop latch.
PlantState reset_safety(const PlantState& state);

}  // namespace bolting
