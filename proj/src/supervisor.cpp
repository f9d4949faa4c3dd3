#include "bolting/supervisor.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace bolting {

namespace {

constexpr std::array<OperatorEvent, 7> kAllOperatorEvents{
    OperatorEvent::Validate,         OperatorEvent::Repeat,        OperatorEvent::TakeManualControl,
    OperatorEvent::ReturnToAutomatic, OperatorEvent::EmergencyStop, OperatorEvent::AckSafetyReset,
    OperatorEvent::StartOperation};

bool is_motion_step(Step s) {
  return s == Step::Approach || s == Step::Coupling || s == Step::Distancing;
}

bool is_bdc_step(Step s) { return s == Step::Tightening || s == Step::Releasing; }

void log(SupervisorState& st, const PlantState& plant, std::string event) {
  st.event_log.push_back(LogEntry{plant.time, std::move(event), st.step, st.phase, st.mode});
}

double segment_duration(const Pose& a, const Pose& b, double speed, const PlanningParams& p) {
  const double lin = (b.position() - a.position()).norm() / speed;
  const double ang = angular_distance(a.orientation(), b.orientation()) / p.angular_speed;
  return std::max({lin, ang, p.min_segment_duration});
}

void require_reachable(const RobotModel& robot, std::span<const Pose> waypoints, Joints seed) {
  for (const Pose& w : waypoints) {
    try {
      seed = inverse_kinematics(robot, w, seed);
    } catch (const std::exception& e) {
      throw UnreachableTarget(std::string("no IK solution for a waypoint: ") + e.what());
    }
  }
}

Pose home_pose(const SupervisorConfig& c) {
  return forward_kinematics(c.robot, c.planning.home_joints);
}

SupervisorResult reject(SupervisorState state, std::string why) {
  return {std::move(state), {}, std::move(why)};
}

/// Stop everything that moves: arm reference, bolt driver and teleop.
void emit_stop(SupervisorState& st, std::vector<Action>& actions) {
  actions.push_back(StopMotion{});
  actions.push_back(IssueBdcCommand{BdcCommand::stop(++st.bdc_command_id)});
  if (st.mode == ControlMode::Manual) actions.push_back(DisableTeleop{});
  st.trajectory.reset();
}

void enter_fault(SupervisorState& st, std::vector<Action>& actions, const PlantState& plant,
                 std::string event) {
  emit_stop(st, actions);
  st.phase = Phase::Faulted;
  st.switching_to.reset();
  st.repeat_pending = false;
  st.step_done = false;
  log(st, plant, std::move(event));
}

/// Emits the actions that carry out `st.step` in the current mode.
void start_step(SupervisorState& st, std::vector<Action>& actions, const PlantState& plant,
                const SupervisorConfig& c) {
  st.step_done = false;
  st.requires_reexecution = false;
  st.trajectory.reset();
  if (st.mode == ControlMode::Manual && st.step != Step::BoltIdentification) {
    // the operator performs the step through teleoperation and validates it
    st.phase = Phase::AwaitingValidation;
    return;
  }
  st.phase = Phase::Executing;
  switch (st.step) {
    case Step::Approach:
    case Step::Coupling:
    case Step::Distancing: {
      Pose target = c.planning.nominal_bolt_pose;
      if (st.step == Step::Coupling) {
        if (!st.pending_target) throw UnreachableTarget("coupling without an identified bolt pose");
        target = *st.pending_target;
      } else if (st.step == Step::Distancing) {
        target = home_pose(c);
      }
      st.trajectory = plan_step_trajectory(st.step, plant.socket_pose, target, c, plant.joints);
      st.trajectory_start = plant.time;
      actions.push_back(LoadTrajectory{*st.trajectory});
      break;
    }
    case Step::BoltIdentification:
      actions.push_back(IdentifyBolt{});
      break;
    case Step::Tightening:
      actions.push_back(IssueBdcCommand{
          BdcCommand::tighten(c.target_torque, c.drive_velocity, ++st.bdc_command_id)});
      break;
    case Step::Releasing:
      actions.push_back(IssueBdcCommand{
          BdcCommand::rotate_by(-c.release_angle, c.drive_velocity, ++st.bdc_command_id)});
      break;
  }
  if (is_bdc_step(st.step)) {
    std::get<IssueBdcCommand>(actions.back()).command.fault_window = c.fault_window;
  }
}

void begin_reset(SupervisorState& st, std::vector<Action>& actions, const PlantState& plant,
                 const SupervisorConfig& c) {
  st.phase = Phase::SafeReset;
  st.trajectory = plan_reset_trajectory(plant.socket_pose, st.safe_snapshot.pose, c);
  st.trajectory_start = plant.time;
  actions.push_back(LoadTrajectory{*st.trajectory});
}

void begin_switch(SupervisorState& st, std::vector<Action>& actions, ControlMode to) {
  st.resume_phase =
      (!st.started || st.pipeline_complete) ? Phase::Idle : Phase::AwaitingValidation;
  actions.push_back(StopMotion{});
  actions.push_back(DisableTeleop{});
  actions.push_back(IssueBdcCommand{BdcCommand::stop(++st.bdc_command_id)});
  st.trajectory.reset();
  st.repeat_pending = false;
  st.switching_to = to;
  st.phase = Phase::SwitchingMode;
}

double speed_of(const PlantState& plant) { return plant.socket_twist.linear.norm(); }

SupervisorResult handle_operator(SupervisorState st, OperatorEvent ev, const PlantState& plant,
                                 const SupervisorConfig& c) {
  if (!is_legal(st, ev)) {
    std::string why = std::string("InvalidTransition: ") + to_string(ev) + " in phase " +
                      to_string(st.phase);
    return reject(std::move(st), std::move(why));
  }
  const SupervisorState before = st;
  std::vector<Action> actions;
  try {
    switch (ev) {
      case OperatorEvent::StartOperation:
        st.started = true;
        st.step = Step::Approach;
        start_step(st, actions, plant, c);
        break;
      case OperatorEvent::Validate:
        st.safe_snapshot = {plant.socket_pose, plant.joints};
        if (st.step == Step::Distancing) {
          st.pipeline_complete = true;
          st.phase = Phase::Idle;
          st.step_done = false;
        } else {
          st.step = static_cast<Step>(static_cast<int>(st.step) + 1);
          start_step(st, actions, plant, c);
        }
        break;
      case OperatorEvent::Repeat:
        st.repeat_pending = true;
        begin_reset(st, actions, plant, c);
        break;
      case OperatorEvent::TakeManualControl:
        if (st.mode == ControlMode::Manual && st.phase != Phase::Faulted) break;  // already manual
        if (st.phase == Phase::Faulted) actions.push_back(ResetSafety{});
        begin_switch(st, actions, ControlMode::Manual);
        break;
      case OperatorEvent::ReturnToAutomatic:
        begin_switch(st, actions, ControlMode::Automatic);
        break;
      case OperatorEvent::EmergencyStop:
        enter_fault(st, actions, plant, "EmergencyStop");
        return {std::move(st), std::move(actions), std::nullopt};
      case OperatorEvent::AckSafetyReset:
        actions.push_back(ResetSafety{});
        begin_reset(st, actions, plant, c);
        break;
    }
  } catch (const UnreachableTarget& e) {
    return reject(before, std::string("UnreachableTarget: ") + e.what());
  }
  log(st, plant, to_string(ev));
  return {std::move(st), std::move(actions), std::nullopt};
}

SupervisorResult handle_plant(SupervisorState st, const PlantEvent& ev, const PlantState& plant) {
  std::vector<Action> actions;
  if (ev.kind == PlantEvent::Kind::BoltIdentified) {
    if (st.step != Step::BoltIdentification || st.phase != Phase::Executing) {
      return reject(std::move(st), "BoltIdentified outside the identification step");
    }
    st.pending_target = ev.pose;
    st.phase = Phase::AwaitingValidation;
    st.step_done = true;
    log(st, plant, "BoltIdentified");
    return {std::move(st), {}, std::nullopt};
  }
  if (st.phase == Phase::Faulted) return {std::move(st), {}, std::nullopt};  // already stopped
  enter_fault(st, actions, plant, to_string(ev.kind));
  return {std::move(st), std::move(actions), std::nullopt};
}

}  // namespace

const char* to_string(Step s) {
  switch (s) {
    case Step::Approach: return "Approach";
    case Step::BoltIdentification: return "BoltIdentification";
    case Step::Coupling: return "Coupling";
    case Step::Tightening: return "Tightening";
    case Step::Releasing: return "Releasing";
    case Step::Distancing: return "Distancing";
  }
  return "?";
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "Idle";
    case Phase::Executing: return "Executing";
    case Phase::AwaitingValidation: return "AwaitingValidation";
    case Phase::Faulted: return "Faulted";
    case Phase::SafeReset: return "SafeReset";
    case Phase::SwitchingMode: return "SwitchingMode";
  }
  return "?";
}

const char* to_string(ControlMode m) {
  return m == ControlMode::Automatic ? "Automatic" : "Manual";
}

const char* to_string(OperatorEvent e) {
  switch (e) {
    case OperatorEvent::Validate: return "Validate";
    case OperatorEvent::Repeat: return "Repeat";
    case OperatorEvent::TakeManualControl: return "TakeManualControl";
    case OperatorEvent::ReturnToAutomatic: return "ReturnToAutomatic";
    case OperatorEvent::EmergencyStop: return "EmergencyStop";
    case OperatorEvent::AckSafetyReset: return "AckSafetyReset";
    case OperatorEvent::StartOperation: return "StartOperation";
  }
  return "?";
}

const char* to_string(PlantEvent::Kind k) {
  switch (k) {
    case PlantEvent::Kind::SafetyTrip: return "SafetyTrip";
    case PlantEvent::Kind::DriverFault: return "DriverFault";
    case PlantEvent::Kind::TrackingError: return "TrackingError";
    case PlantEvent::Kind::BoltIdentified: return "BoltIdentified";
  }
  return "?";
}

std::string event_name(const SupervisorEvent& e) {
  if (const auto* op = std::get_if<OperatorEvent>(&e)) return to_string(*op);
  return to_string(std::get<PlantEvent>(e).kind);
}

namespace {
template <class E, std::size_t N>
std::optional<E> parse_enum(std::string_view s, const std::array<E, N>& all) {
  for (E e : all)
    if (s == to_string(e)) return e;
  return std::nullopt;
}
}  // namespace

std::optional<Step> step_from_string(std::string_view s) {
  return parse_enum(s, std::array{Step::Approach, Step::BoltIdentification, Step::Coupling,
                                  Step::Tightening, Step::Releasing, Step::Distancing});
}

std::optional<Phase> phase_from_string(std::string_view s) {
  return parse_enum(s, std::array{Phase::Idle, Phase::Executing, Phase::AwaitingValidation,
                                  Phase::Faulted, Phase::SafeReset, Phase::SwitchingMode});
}

std::optional<ControlMode> mode_from_string(std::string_view s) {
  return parse_enum(s, std::array{ControlMode::Automatic, ControlMode::Manual});
}

std::optional<OperatorEvent> operator_event_from_string(std::string_view s) {
  return parse_enum(s, kAllOperatorEvents);
}

const char* action_name(const Action& a) {
  struct V {
    const char* operator()(const StopMotion&) const { return "StopMotion"; }
    const char* operator()(const LoadTrajectory&) const { return "LoadTrajectory"; }
    const char* operator()(const IssueBdcCommand& c) const {
      return c.command.mode == BdcMode::Stop ? "BdcStop" : "BdcCommand";
    }
    const char* operator()(const EnableTeleop&) const { return "EnableTeleop"; }
    const char* operator()(const DisableTeleop&) const { return "DisableTeleop"; }
    const char* operator()(const SetMode&) const { return "SetMode"; }
    const char* operator()(const IdentifyBolt&) const { return "IdentifyBolt"; }
    const char* operator()(const ResetSafety&) const { return "ResetSafety"; }
  };
  return std::visit(V{}, a);
}

void PlanningParams::validate() const {
  if (!(standoff_distance > 0.0)) throw std::invalid_argument("standoff_distance must be positive");
  if (!(approach_speed > 0.0) || !(coupling_speed > 0.0) || !(angular_speed > 0.0))
    throw std::invalid_argument("planning speeds must be positive");
  if (!(min_segment_duration > 0.0))
    throw std::invalid_argument("min_segment_duration must be positive");
}

SupervisorState SupervisorState::initial(const PlantState& plant) {
  SupervisorState s;
  s.safe_snapshot = {plant.socket_pose, plant.joints};
  return s;
}

bool is_legal(const SupervisorState& st, OperatorEvent ev) {
  const bool switching = st.phase == Phase::SwitchingMode;
  switch (ev) {
    case OperatorEvent::StartOperation:
      return st.phase == Phase::Idle && !st.started;
    case OperatorEvent::Validate:
      return st.phase == Phase::AwaitingValidation &&
             (st.mode == ControlMode::Manual || st.step_done);
    case OperatorEvent::Repeat:
      return st.phase == Phase::AwaitingValidation && st.mode == ControlMode::Automatic;
    case OperatorEvent::TakeManualControl:
    case OperatorEvent::EmergencyStop:
      return !switching;
    case OperatorEvent::ReturnToAutomatic:
      return st.mode == ControlMode::Manual && !switching && st.phase != Phase::Faulted &&
             st.phase != Phase::SafeReset;
    case OperatorEvent::AckSafetyReset:
      return st.phase == Phase::Faulted;
  }
  return false;
}

std::vector<OperatorEvent> legal_events(const SupervisorState& state) {
  std::vector<OperatorEvent> out;
  for (OperatorEvent e : kAllOperatorEvents)
    if (is_legal(state, e)) out.push_back(e);
  return out;
}

SupervisorResult sv_handle(SupervisorState state, const SupervisorEvent& event,
                           const PlantState& plant, const SupervisorConfig& config) {
  if (const auto* op = std::get_if<OperatorEvent>(&event))
    return handle_operator(std::move(state), *op, plant, config);
  return handle_plant(std::move(state), std::get<PlantEvent>(event), plant);
}

SupervisorResult sv_tick(SupervisorState st, const PlantState& plant, const BdcStatus& bdc,
                         const SupervisorConfig& c) {
  std::vector<Action> actions;
  if (st.phase != Phase::Faulted) {
    if (plant.safety_tripped) {
      enter_fault(st, actions, plant, "SafetyTrip");
      return {std::move(st), std::move(actions), std::nullopt};
    }
    if (st.phase == Phase::Executing && is_bdc_step(st.step) && bdc.driver_fault &&
        bdc.command_id == st.bdc_command_id) {
      enter_fault(st, actions, plant, "DriverFault");
      return {std::move(st), std::move(actions), std::nullopt};
    }
    if (st.phase == Phase::Executing && st.mode == ControlMode::Automatic && st.trajectory) {
      const PoseError e = pose_error(sample(*st.trajectory, plant.time - st.trajectory_start),
                                     plant.socket_pose);
      if (e.position.norm() > c.tracking_position_limit ||
          e.orientation.norm() > c.tracking_orientation_limit) {
        enter_fault(st, actions, plant, "TrackingError");
        return {std::move(st), std::move(actions), std::nullopt};
      }
    }
  }

  const double speed = speed_of(plant);
  const bool elapsed =
      st.trajectory && plant.time - st.trajectory_start >= st.trajectory->duration() - 1e-12;

  switch (st.phase) {
    case Phase::Executing:
      if (is_motion_step(st.step) && elapsed && speed < c.settle_speed) {
        st.trajectory.reset();
        st.phase = Phase::AwaitingValidation;
        st.step_done = true;
        log(st, plant, "StepComplete");
      } else if (is_bdc_step(st.step) && bdc.complete && bdc.command_id == st.bdc_command_id) {
        st.phase = Phase::AwaitingValidation;
        st.step_done = true;
        log(st, plant, st.step == Step::Tightening ? "TighteningComplete" : "ReleaseComplete");
      }
      break;
    case Phase::SafeReset:
      if (elapsed && speed < c.settle_speed &&
          (plant.socket_pose.position() - st.safe_snapshot.pose.position()).norm() <=
              c.arrival_tolerance) {
        st.trajectory.reset();
        if (st.mode == ControlMode::Manual) actions.push_back(EnableTeleop{});
        if (st.repeat_pending) {
          st.repeat_pending = false;
          log(st, plant, "ArrivedAtSnapshot");
          try {
            start_step(st, actions, plant, c);
          } catch (const UnreachableTarget&) {
            st.phase = Phase::AwaitingValidation;
          }
          log(st, plant, "StepRestarted");
        } else if (!st.started || st.pipeline_complete) {
          st.phase = Phase::Idle;
          log(st, plant, "ArrivedAtSnapshot");
        } else {
          st.phase = Phase::AwaitingValidation;
          st.step_done = false;
          st.requires_reexecution = true;
          log(st, plant, "ArrivedAtSnapshot");
        }
      }
      break;
    case Phase::SwitchingMode:
      if (st.switching_to && speed < c.settle_speed) {
        const ControlMode to = *st.switching_to;
        st.switching_to.reset();
        st.mode = to;
        st.phase = st.resume_phase;
        actions.push_back(SetMode{to});
        if (to == ControlMode::Manual) {
          actions.push_back(EnableTeleop{});
        } else if (st.phase == Phase::AwaitingValidation) {
          // the manually executed step is offered for validation
          st.step_done = true;
        }
        log(st, plant, "ModeChanged");
      }
      break;
    default:
      break;
  }
  return {std::move(st), std::move(actions), std::nullopt};
}

Pose standoff_pose(const Pose& target, double distance) {
  return Pose(target.position() + distance * target.axis_z(), target.orientation());
}

TimedTrajectory plan_step_trajectory(Step step, const Pose& current, const Pose& target,
                                     const SupervisorConfig& c, const Joints& seed) {
  const PlanningParams& p = c.planning;
  std::vector<Pose> way{current};
  std::vector<double> dur;
  auto add = [&](const Pose& next, double speed) {
    if ((next.position() - way.back().position()).norm() < 1e-9 &&
        angular_distance(next.orientation(), way.back().orientation()) < 1e-9)
      return;
    dur.push_back(segment_duration(way.back(), next, speed, p));
    way.push_back(next);
  };
  switch (step) {
    case Step::Approach:
      add(standoff_pose(target, p.standoff_distance), p.approach_speed);
      break;
    case Step::Coupling:
      add(standoff_pose(target, p.standoff_distance), p.approach_speed);
      add(target, p.coupling_speed);
      break;
    case Step::Distancing:
      add(standoff_pose(current, p.standoff_distance), p.coupling_speed);
      add(target, p.approach_speed);
      break;
    default:
      throw std::invalid_argument(std::string("no motion plan for step ") + to_string(step));
  }
  if (dur.empty()) {
    // already there: a hold of minimum length keeps the completion logic uniform
    way.push_back(current);
    dur.push_back(p.min_segment_duration);
  }
  require_reachable(c.robot, std::span<const Pose>(way).subspan(1), seed);
  return via_point_trajectory(way, dur);
}

TimedTrajectory plan_reset_trajectory(const Pose& current, const Pose& snapshot,
                                      const SupervisorConfig& c) {
  const std::array<Pose, 2> way{current, snapshot};
  const std::array<double, 1> dur{segment_duration(current, snapshot, c.planning.approach_speed,
                                                   c.planning)};
  return via_point_trajectory(way, dur);
}

}  // namespace bolting
