#pragma once

// Bolt Driver Controller: constant-velocity tightening to a torque
// threshold, stop interruption, and position-mode release rotation.

#include <cstdint>

namespace bolting {

enum class BdcMode { Idle, TightenToTorque, RotateBy, Stop };

const char* to_string(BdcMode mode);

struct BdcCommand {
  BdcMode mode = BdcMode::Idle;
  double target_torque = 8.0;    // N*m, TightenToTorque
  double rotation_amount = 0.0;  // rad, RotateBy; sign is the direction
  double drive_velocity = 2.0;   // rad/s
  int fault_window = 50;         // ticks without encoder progress
  /// A new id restarts progress tracking; re-sending the same id is a no-op.
  std::int64_t id = 0;

  static BdcCommand tighten(double target_torque, double drive_velocity, std::int64_t id);
  static BdcCommand rotate_by(double amount, double drive_velocity, std::int64_t id);
  static BdcCommand stop(std::int64_t id);

  void validate() const;
};

struct BdcStatus {
  BdcMode mode = BdcMode::Idle;
  double measured_torque = 0.0;
  double rotated = 0.0;  // encoder progress since the command started
  bool complete = false;
  bool interrupted = false;
  bool driver_fault = false;

  std::int64_t command_id = -1;
  double last_encoder = 0.0;
  double last_velocity = 0.0;
  int stall_ticks = 0;
};

struct BdcOutput {
  BdcStatus status;
  double velocity = 0.0;  // rad/s
};

/// One controller tick. `measured_rotation` is the driver output encoder.
BdcOutput bdc_tick(const BdcStatus& status, const BdcCommand& cmd, double measured_torque,
                   double measured_rotation, double dt);

/// Worst-case single-tick overshoot of the discrete torque threshold check.
double torque_overshoot_bound(double drive_velocity, double thread_stiffness, double dt);

}  // namespace bolting
