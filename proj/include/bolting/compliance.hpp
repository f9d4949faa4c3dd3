#pragma once

// Admittance controller, reference generator and latched safety monitor.

#include "bolting/geometry.hpp"

#include <optional>

namespace bolting {

enum class GateAgainst { Reference, Current };

struct AdmittanceParams {
  /// Per-axis [x y z rx ry rz]; translational then rotational.
  Vec6 virtual_mass = (Vec6() << 8, 8, 8, 0.5, 0.5, 0.5).finished();
  Vec6 virtual_damping = (Vec6() << 180, 180, 180, 6, 6, 6).finished();
  Vec6 virtual_stiffness = (Vec6() << 1000, 1000, 1000, 25, 25, 25).finished();
  double jump_threshold_position = 0.05;  // m
  double jump_threshold_orientation = 0.25;  // rad
  GateAgainst gate_against = GateAgainst::Reference;

  /// Throws std::invalid_argument when any invariant is violated.
  void validate() const;
};

struct AdmittanceState {
  Pose virtual_pose;
  Twist virtual_twist;
  Pose last_reference;
  double last_reference_time = 0.0;
  /// Number of references dropped by the jump gate (diagnostic).
  long discarded_references = 0;

  /// At rest on `pose`, with `pose` as the held reference.
  static AdmittanceState at_rest(const Pose& pose, double time = 0.0);
};

struct AdmittanceOutput {
  AdmittanceState state;
  Pose commanded_pose;
  bool reference_accepted = false;
};

/// One control cycle of M*a + D*v + K*(x - x_ref) = F_ext, integrated with
/// semi-implicit Euler. `measured` is the external wrench at the tool point,
/// expressed in the base frame. `time` stamps accepted references.
AdmittanceOutput admittance_update(const AdmittanceState& state, const AdmittanceParams& params,
                                   const std::optional<Pose>& reference, const Wrench& measured,
                                   double dt, double time = 0.0);

/// Rigid-motion bypass: same reference gating, commanded pose = held reference.
AdmittanceOutput rigid_update(const AdmittanceState& state, const AdmittanceParams& params,
                              const std::optional<Pose>& reference, double dt, double time = 0.0);

/// True when `reference` would pass the jump gate for this state.
bool reference_within_gate(const AdmittanceState& state, const AdmittanceParams& params,
                           const Pose& reference);

/// 1/2 v'Mv + 1/2 e'Ke about the held reference.
double admittance_energy(const AdmittanceState& state, const AdmittanceParams& params);

/// Automatic-mode reference stream: the trajectory sampled at `elapsed`.
Pose rgc_tick(const TimedTrajectory& traj, double elapsed);

struct SafetyMonitor {
  double force_threshold = 50.0;   // N
  double torque_threshold = 15.0;  // N*m
  bool tripped = false;
};

/// Latches `tripped` when |force| or |torque| exceeds its threshold.
SafetyMonitor safety_check(const SafetyMonitor& monitor, const Wrench& wrench);
/// Clears the latch only on operator acknowledgement.
SafetyMonitor safety_reset(const SafetyMonitor& monitor, bool operator_ack);

}  // namespace bolting
