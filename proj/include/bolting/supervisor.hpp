#pragma once

// Supervisory state machine for the six-step bolting pipeline: explicit
// operator validation between steps, fault handling with return to the last
// validated configuration, and automatic/manual mode hand-over.

#include "bolting/bolt_driver.hpp"
#include "bolting/geometry.hpp"
#include "bolting/kinematics.hpp"
#include "bolting/plant.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace bolting {

enum class Step { Approach, BoltIdentification, Coupling, Tightening, Releasing, Distancing };
enum class Phase { Idle, Executing, AwaitingValidation, Faulted, SafeReset, SwitchingMode };
enum class ControlMode { Automatic, Manual };
enum class OperatorEvent {
  Validate,
  Repeat,
  TakeManualControl,
  ReturnToAutomatic,
  EmergencyStop,
  AckSafetyReset,
  StartOperation,
};

struct PlantEvent {
  enum class Kind { SafetyTrip, DriverFault, TrackingError, BoltIdentified };
  Kind kind = Kind::SafetyTrip;
  Pose pose;  // BoltIdentified only
};

using SupervisorEvent = std::variant<OperatorEvent, PlantEvent>;

const char* to_string(Step s);
const char* to_string(Phase p);
const char* to_string(ControlMode m);
const char* to_string(OperatorEvent e);
const char* to_string(PlantEvent::Kind k);
std::string event_name(const SupervisorEvent& e);

std::optional<Step> step_from_string(std::string_view s);
std::optional<Phase> phase_from_string(std::string_view s);
std::optional<ControlMode> mode_from_string(std::string_view s);
std::optional<OperatorEvent> operator_event_from_string(std::string_view s);

// Actions consumed by the control loop.
struct StopMotion {};
struct LoadTrajectory {
  TimedTrajectory trajectory;
};
struct IssueBdcCommand {
  BdcCommand command;
};
struct EnableTeleop {};
struct DisableTeleop {};
struct SetMode {
  ControlMode mode = ControlMode::Automatic;
};
struct IdentifyBolt {};
struct ResetSafety {};

using Action = std::variant<StopMotion, LoadTrajectory, IssueBdcCommand, EnableTeleop,
                            DisableTeleop, SetMode, IdentifyBolt, ResetSafety>;

const char* action_name(const Action& a);

struct PlanningParams {
  double standoff_distance = 0.08;  // m
  double approach_speed = 0.05;     // m/s
  double coupling_speed = 0.01;     // m/s
  double angular_speed = 0.5;       // rad/s
  double min_segment_duration = 0.2;  // s
  Joints home_joints = Joints::Zero();
  /// Where the bolt is expected before it has been identified.
  Pose nominal_bolt_pose;

  void validate() const;
};

struct SupervisorConfig {
  RobotModel robot = RobotModel::ur5e();
  PlanningParams planning;
  double target_torque = 8.0;
  double drive_velocity = 2.0;
  double release_angle = 0.35;
  int fault_window = 50;
  /// Tracking-error fault: reference vs plant beyond these.
  double tracking_position_limit = 0.1;
  double tracking_orientation_limit = 0.5;
  double settle_speed = 1e-3;       // m/s
  double arrival_tolerance = 1e-3;  // m
};

struct SafeSnapshot {
  Pose pose;
  Joints joints = Joints::Zero();
};

struct LogEntry {
  double time = 0.0;
  std::string event;
  Step step = Step::Approach;
  Phase phase = Phase::Idle;
  ControlMode mode = ControlMode::Automatic;
};

struct SupervisorState {
  Step step = Step::Approach;
  Phase phase = Phase::Idle;
  ControlMode mode = ControlMode::Automatic;
  SafeSnapshot safe_snapshot;
  std::optional<Pose> pending_target;
  std::vector<LogEntry> event_log;

  bool started = false;
  bool pipeline_complete = false;
  /// The current step has finished (automatic) and may be validated.
  bool step_done = false;
  /// Set by a fault reset: the step must be repeated or taken over manually.
  bool requires_reexecution = false;
  bool repeat_pending = false;
  std::optional<ControlMode> switching_to;
  Phase resume_phase = Phase::AwaitingValidation;  // after the switch completes

  std::optional<TimedTrajectory> trajectory;
  double trajectory_start = 0.0;
  std::int64_t bdc_command_id = 0;

  static SupervisorState initial(const PlantState& plant);
};

class InvalidTransition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnreachableTarget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SupervisorResult {
  SupervisorState state;
  std::vector<Action> actions;
  /// Set when the event was rejected; `state` is then the input state.
  std::optional<std::string> rejection;
};

bool is_legal(const SupervisorState& state, OperatorEvent event);
std::vector<OperatorEvent> legal_events(const SupervisorState& state);

/// Pure transition function. Rejections leave the state untouched.
SupervisorResult sv_handle(SupervisorState state, const SupervisorEvent& event,
                           const PlantState& plant, const SupervisorConfig& config);

/// Polls completion and fault conditions once per control cycle.
SupervisorResult sv_tick(SupervisorState state, const PlantState& plant, const BdcStatus& bdc,
                         const SupervisorConfig& config);

/// Motion plan for Approach, Coupling and Distancing. Throws UnreachableTarget
/// when a waypoint has no IK solution from `seed`.
TimedTrajectory plan_step_trajectory(Step step, const Pose& current, const Pose& target,
                                     const SupervisorConfig& config, const Joints& seed);

/// Straight move back to a validated configuration.
TimedTrajectory plan_reset_trajectory(const Pose& current, const Pose& snapshot,
                                      const SupervisorConfig& config);

/// Standoff pose: `target` shifted along its own z-axis.
Pose standoff_pose(const Pose& target, double distance);

}  // namespace bolting
