#include "bolting/bolt_driver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bolting {

const char* to_string(BdcMode mode) {
  switch (mode) {
    case BdcMode::Idle: return "Idle";
    case BdcMode::TightenToTorque: return "TightenToTorque";
    case BdcMode::RotateBy: return "RotateBy";
    case BdcMode::Stop: return "Stop";
  }
  return "?";
}

BdcCommand BdcCommand::tighten(double target_torque, double drive_velocity, std::int64_t id) {
  BdcCommand c;
  c.mode = BdcMode::TightenToTorque;
  c.target_torque = target_torque;
  c.drive_velocity = drive_velocity;
  c.id = id;
  return c;
}

BdcCommand BdcCommand::rotate_by(double amount, double drive_velocity, std::int64_t id) {
  BdcCommand c;
  c.mode = BdcMode::RotateBy;
  c.rotation_amount = amount;
  c.drive_velocity = drive_velocity;
  c.id = id;
  return c;
}

BdcCommand BdcCommand::stop(std::int64_t id) {
  BdcCommand c;
  c.mode = BdcMode::Stop;
  c.id = id;
  return c;
}

void BdcCommand::validate() const {
  if (!(drive_velocity > 0.0)) throw std::invalid_argument("drive_velocity must be > 0");
  if (mode == BdcMode::TightenToTorque && !(target_torque > 0.0))
    throw std::invalid_argument("target_torque must be > 0");
  if (mode == BdcMode::RotateBy && !std::isfinite(rotation_amount))
    throw std::invalid_argument("rotation_amount must be finite");
  if (fault_window < 1) throw std::invalid_argument("fault_window must be >= 1");
}

BdcOutput bdc_tick(const BdcStatus& status, const BdcCommand& cmd, double measured_torque,
                   double measured_rotation, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("bdc dt must be > 0");
  BdcOutput out;
  BdcStatus& s = out.status;
  s = status;
  s.measured_torque = measured_torque;

  if (cmd.id != status.command_id) {
    // Stop keeps the progress of whatever it interrupts
    const bool was_complete = status.complete;
    s = BdcStatus{};
    s.measured_torque = measured_torque;
    s.command_id = cmd.id;
    s.mode = cmd.mode;
    s.last_encoder = measured_rotation;
    if (cmd.mode == BdcMode::Stop) {
      s.rotated = status.rotated;
      s.complete = was_complete;
      s.driver_fault = status.driver_fault;
    }
  } else {
    const double delta = measured_rotation - status.last_encoder;
    s.rotated += delta;
    s.last_encoder = measured_rotation;
    if (status.last_velocity != 0.0 && delta == 0.0) {
      ++s.stall_ticks;
    } else if (delta != 0.0) {
      s.stall_ticks = 0;
    }
    if (s.stall_ticks >= cmd.fault_window) s.driver_fault = true;
  }

  double v = 0.0;
  switch (cmd.mode) {
    case BdcMode::Idle:
      break;
    case BdcMode::Stop:
      s.interrupted = !s.complete;
      break;
    case BdcMode::TightenToTorque:
      if (!s.complete && measured_torque >= cmd.target_torque) s.complete = true;
      if (!s.complete) v = cmd.drive_velocity;
      break;
    case BdcMode::RotateBy: {
      const double remaining = std::abs(cmd.rotation_amount) - std::abs(s.rotated);
      if (!s.complete && remaining <= 1e-12) s.complete = true;
      if (!s.complete) {
        // the last tick is shortened so the terminal error stays tiny
        const double speed = std::min(cmd.drive_velocity, remaining / dt);
        v = std::copysign(speed, cmd.rotation_amount);
      }
      break;
    }
  }
  if (s.driver_fault) v = 0.0;
  s.last_velocity = v;
  out.velocity = v;
  return out;
}

double torque_overshoot_bound(double drive_velocity, double thread_stiffness, double dt) {
  if (drive_velocity < 0.0 || thread_stiffness < 0.0 || dt < 0.0)
    throw std::invalid_argument("overshoot bound inputs must be non-negative");
  return thread_stiffness * drive_velocity * dt;
}

}  // namespace bolting
