#pragma once

// Random event-sequence model check for the supervisor against a mock plant.
// Shared by the unit tests and the acceptance binary.

#include "bolting/supervisor.hpp"

#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace harness {

using namespace bolting;

inline Joints home_joints() {
  constexpr double pi = std::numbers::pi;
  return (Joints() << 0, -pi / 2, pi / 2, -pi / 2, -pi / 2, 0).finished();
}

inline SupervisorConfig mock_config() {
  SupervisorConfig c;
  c.planning.home_joints = home_joints();
  c.planning.nominal_bolt_pose =
      Pose(Vec3(-0.50, -0.13, 0.15), Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ())));
  c.fault_window = 10;
  return c;
}

enum class Kind { Operator, SafetyTrip, TrackingError, KillDriver };

struct ScriptedEvent {
  int tick = 0;
  Kind kind = Kind::Operator;
  OperatorEvent op = OperatorEvent::Validate;
};

/// Events are drawn independently of the state, so most are illegal at the
/// time they arrive; that is the point.
inline std::vector<ScriptedEvent> random_script(std::uint64_t seed, int ticks) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::discrete_distribution<int> pick({30, 8, 5, 8, 8, 3, 10, 4, 2, 2});
  std::vector<ScriptedEvent> out;
  for (int t = 0; t < ticks; ++t) {
    if (u(rng) > 0.12) continue;
    const int k = pick(rng);
    ScriptedEvent e{t};
    switch (k) {
      case 0: e.op = OperatorEvent::Validate; break;
      case 1: e.op = OperatorEvent::StartOperation; break;
      case 2: e.op = OperatorEvent::Repeat; break;
      case 3: e.op = OperatorEvent::TakeManualControl; break;
      case 4: e.op = OperatorEvent::ReturnToAutomatic; break;
      case 5: e.op = OperatorEvent::EmergencyStop; break;
      case 6: e.op = OperatorEvent::AckSafetyReset; break;
      case 7: e.kind = Kind::SafetyTrip; break;
      case 8: e.kind = Kind::TrackingError; break;
      default: e.kind = Kind::KillDriver; break;
    }
    out.push_back(e);
  }
  return out;
}

struct Tally {
  long sequences = 0;
  long step_advances = 0;
  long unvalidated_advances = 0;
  long mode_switches = 0;
  long bad_mode_switches = 0;
  long authority_checks = 0;
  long authority_rejections = 0;
  long snapshot_checks = 0;
  long snapshot_violations = 0;
  long replay_mismatches = 0;
  long rejected_mutations = 0;
  long completed_pipelines = 0;

  bool ok() const {
    return unvalidated_advances == 0 && bad_mode_switches == 0 && authority_rejections == 0 &&
           snapshot_violations == 0 && replay_mismatches == 0 &&
           rejected_mutations == 0;
  }
};

inline void append_pose(std::string& s, const Pose& p) {
  char buf[40];
  for (double v : p.to_array()) {
    std::snprintf(buf, sizeof buf, "%.17g,", v);
    s += buf;
  }
}

inline std::string serialize(const SupervisorState& st) {
  std::string s;
  s += to_string(st.step);
  s += '|';
  s += to_string(st.phase);
  s += '|';
  s += to_string(st.mode);
  s += '|';
  append_pose(s, st.safe_snapshot.pose);
  if (st.pending_target) append_pose(s, *st.pending_target);
  s += st.started ? 'S' : 's';
  s += st.pipeline_complete ? 'C' : 'c';
  s += st.step_done ? 'D' : 'd';
  s += st.requires_reexecution ? 'R' : 'r';
  s += std::to_string(st.bdc_command_id);
  s += '|';
  s += std::to_string(st.event_log.size());
  if (!st.event_log.empty()) s += st.event_log.back().event;
  s += '\n';
  return s;
}

/// Mock plant: first-order lag towards the reference, a linear-spring bolt
/// and the real bolt-driver controller.
class MockRun {
 public:
  MockRun(const SupervisorConfig& c, std::uint64_t jog_seed) : c_(c), jog_(jog_seed) {
    plant_.joints = c.planning.home_joints;
    plant_.socket_pose = forward_kinematics(c.robot, plant_.joints);
    reference_ = plant_.socket_pose;
    st_ = SupervisorState::initial(plant_);
    validated_snapshot_ = plant_.socket_pose;
  }

  std::string run(const std::vector<ScriptedEvent>& script, int ticks, Tally& tally) {
    std::string trace;
    std::size_t next = 0;
    for (int t = 0; t < ticks; ++t) {
      if (identify_pending_) {
        identify_pending_ = false;
        PlantEvent ev{PlantEvent::Kind::BoltIdentified,
                      compose(Pose::translation(0.001, -0.002, 0.0), c_.planning.nominal_bolt_pose)};
        handle(ev, tally);
      }
      for (; next < script.size() && script[next].tick == t; ++next) {
        const ScriptedEvent& e = script[next];
        switch (e.kind) {
          case Kind::Operator: handle(e.op, tally); break;
          case Kind::SafetyTrip: plant_.safety_tripped = true; break;
          case Kind::TrackingError: handle(PlantEvent{PlantEvent::Kind::TrackingError, {}}, tally); break;
          case Kind::KillDriver: driver_dead_ = !driver_dead_; break;
        }
      }
      const SupervisorState before = st_;
      SupervisorResult r = sv_tick(st_, plant_, bdc_, c_);
      check(before, r, /*from_tick=*/true, tally);
      st_ = std::move(r.state);
      apply(r.actions);
      advance();
      trace += serialize(st_);
    }
    if (st_.pipeline_complete) ++tally.completed_pipelines;
    return trace;
  }

  const SupervisorState& state() const { return st_; }

 private:
  void handle(const SupervisorEvent& ev, Tally& tally) {
    const SupervisorState before = st_;
    const bool authority = std::holds_alternative<OperatorEvent>(ev) &&
                           (std::get<OperatorEvent>(ev) == OperatorEvent::TakeManualControl ||
                            std::get<OperatorEvent>(ev) == OperatorEvent::EmergencyStop) &&
                           st_.phase != Phase::SwitchingMode;
    SupervisorResult r = sv_handle(st_, ev, plant_, c_);
    if (authority) {
      ++tally.authority_checks;
      if (r.rejection) ++tally.authority_rejections;
    }
    if (r.rejection && serialize(r.state) != serialize(before)) ++tally.rejected_mutations;
    const bool validated = std::holds_alternative<OperatorEvent>(ev) &&
                           std::get<OperatorEvent>(ev) == OperatorEvent::Validate && !r.rejection;
    if (validated) validated_snapshot_ = plant_.socket_pose;
    check(before, r, /*from_tick=*/false, tally);
    st_ = std::move(r.state);
    apply(r.actions);
  }

  void check(const SupervisorState& before, const SupervisorResult& r, bool from_tick,
             Tally& tally) {
    const SupervisorState& after = r.state;
    // every step change is a +1 advance logged as the Validate that caused it
    if (after.step != before.step) {
      ++tally.step_advances;
      const bool ok = static_cast<int>(after.step) == static_cast<int>(before.step) + 1 &&
                      after.event_log.size() == before.event_log.size() + 1 &&
                      after.event_log.back().event == "Validate";
      if (!ok) ++tally.unvalidated_advances;
    }
    if (after.mode != before.mode) {
      ++tally.mode_switches;
      const bool ok = from_tick && before.phase == Phase::SwitchingMode &&
                      plant_.socket_twist.linear.norm() < 1e-3;
      if (!ok) ++tally.bad_mode_switches;
    }
    if ((after.safe_snapshot.pose.to_array() != validated_snapshot_.to_array()) &&
        !(after.event_log.size() > before.event_log.size() &&
          after.event_log.back().event == "Validate")) {
      ++tally.snapshot_violations;  // snapshot moved without a validation
    }
    if (before.phase == Phase::SafeReset && after.phase == Phase::AwaitingValidation) {
      ++tally.snapshot_checks;
      if ((plant_.socket_pose.position() - validated_snapshot_.position()).norm() > 1e-3)
        ++tally.snapshot_violations;
    }
  }

  void apply(const std::vector<Action>& actions) {
    for (const Action& a : actions) {
      if (std::holds_alternative<StopMotion>(a)) {
        trajectory_.reset();
        reference_ = plant_.socket_pose;
      } else if (const auto* l = std::get_if<LoadTrajectory>(&a)) {
        trajectory_ = l->trajectory;
        trajectory_start_ = plant_.time;
      } else if (const auto* b = std::get_if<IssueBdcCommand>(&a)) {
        command_ = b->command;
        encoder_at_start_ = encoder_;
      } else if (std::holds_alternative<EnableTeleop>(a)) {
        teleop_ = true;
      } else if (std::holds_alternative<DisableTeleop>(a)) {
        teleop_ = false;
      } else if (std::holds_alternative<IdentifyBolt>(a)) {
        identify_pending_ = true;
      } else if (std::holds_alternative<ResetSafety>(a)) {
        plant_.safety_tripped = false;
      }
    }
  }

  void advance() {
    constexpr double dt = 0.05;
    if (trajectory_) {
      reference_ = sample(*trajectory_, plant_.time + dt - trajectory_start_);
    } else if (teleop_) {
      std::normal_distribution<double> jog(0.0, 0.002);
      reference_ = compose(Pose::translation(jog(jog_), jog(jog_), jog(jog_)), reference_);
    }
    const Pose prev = plant_.socket_pose;
    plant_.socket_pose = interpolate(prev, reference_, 0.6);
    plant_.socket_twist.linear = (plant_.socket_pose.position() - prev.position()) / dt;
    plant_.time += dt;

    const BdcOutput out = bdc_tick(bdc_, command_, torque_, encoder_, dt);
    bdc_ = out.status;
    if (!driver_dead_) encoder_ += out.velocity * dt;
    torque_ = std::max(0.0, 4.0 * (encoder_ - encoder_at_start_ - 1.0));
  }

  SupervisorConfig c_;
  std::mt19937_64 jog_;
  PlantState plant_;
  SupervisorState st_;
  Pose reference_;
  Pose validated_snapshot_;
  std::optional<TimedTrajectory> trajectory_;
  double trajectory_start_ = 0.0;
  bool teleop_ = false;
  bool identify_pending_ = false;
  bool driver_dead_ = false;
  BdcCommand command_;
  BdcStatus bdc_;
  double encoder_ = 0.0;
  double encoder_at_start_ = 0.0;
  double torque_ = 0.0;
};

/// Runs `n` random sequences, each twice, and folds the property counters.
inline Tally model_check(int n, std::uint64_t seed, int ticks = 400) {
  const SupervisorConfig c = mock_config();
  Tally tally;
  for (int i = 0; i < n; ++i) {
    const auto script = random_script(seed + static_cast<std::uint64_t>(i), ticks);
    Tally scratch;
    MockRun a(c, seed + i), b(c, seed + i);
    const std::string ta = a.run(script, ticks, tally);
    const std::string tb = b.run(script, ticks, scratch);
    if (ta != tb) ++tally.replay_mismatches;
    ++tally.sequences;
  }
  return tally;
}

}  // namespace harness
