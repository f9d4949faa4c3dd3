#include "bolting/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace bolting {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

}  // namespace

json RunReport::to_json() const {
  return json{{"scenario", scenario},
              {"variant", variant},
              {"seed", seed},
              {"outcome", to_string(outcome)},
              {"expected_outcome", expected ? json(to_string(*expected)) : json(nullptr)},
              {"expected_matched", expected_matched()},
              {"peak_normal_force", peak_normal_force},
              {"final_bolt_torque", final_bolt_torque},
              {"coupling_error", optional_json(coupling_error)},
              {"safety_trip_count", safety_trip_count},
              {"duration", duration},
              {"frames", frames},
              {"telemetry_path", telemetry_path},
              {"event_log_path", event_log_path}};
}

bool goal_reached(const Goal& goal, const TelemetryFrame& f) {
  if (goal.complete_after_step == Step::Distancing) return f.pipeline_complete;
  return static_cast<int>(f.step) > static_cast<int>(goal.complete_after_step) ||
         f.pipeline_complete;
}

void ReportFold::add(const TelemetryFrame& f) {
  any_ = true;
  ++frames_;
  peak_force_ = std::max(peak_force_, f.normal_force);
  last_torque_ = f.bolt_torque;
  last_time_ = f.time;
  if (f.safety_tripped && !prev_tripped_) ++trips_;
  prev_tripped_ = f.safety_tripped;
  self_collision_ = self_collision_ || f.self_collision;
  if (f.step == Step::Coupling) coupling_error_ = f.lateral_error;
  goal_reached_ = goal_reached_ || goal_reached(goal_, f);
}

RunReport ReportFold::finish(RunReport r) const {
  if (self_collision_)
    r.outcome = Outcome::SelfCollision;
  else if (goal_reached_)
    r.outcome = Outcome::Success;
  else if (trips_ > 0)
    r.outcome = Outcome::SafetyTrip;
  else
    r.outcome = Outcome::Timeout;
  r.peak_normal_force = peak_force_;
  r.final_bolt_torque = last_torque_;
  r.coupling_error = coupling_error_;
  r.safety_trip_count = trips_;
  r.duration = last_time_;
  r.frames = frames_;
  return r;
}

RunReport report_from_log(const fs::path& telemetry, const Goal& goal) {
  std::ifstream in(telemetry);
  if (!in) throw std::runtime_error("cannot open " + telemetry.string());
  ReportFold fold(goal);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    fold.add(decode_telemetry(line));
  }
  RunReport base;
  base.telemetry_path = telemetry.string();
  return fold.finish(base);
}

std::string hello_for(const ScenarioSpec& spec, double rate_limit) {
  return encode_hello(spec.world.robot, spec.world.bolt.true_pose, spec.world.bolt.head_across_flats,
                      spec.world.bolt.head_height, spec.world.safety.force_threshold, 1.0 / spec.dt,
                      rate_limit);
}

namespace {

class EventWriter {
 public:
  explicit EventWriter(const fs::path& path) {
    if (!path.empty()) out_.open(path);
  }
  void write(double time, const char* kind, const std::string& source, const std::string& event,
             const SupervisorState& sv, std::optional<bool> accepted = std::nullopt,
             const std::string& detail = "") {
    if (!out_.is_open()) return;
    json j{{"time", time},
           {"kind", kind},
           {"source", source},
           {"event", event},
           {"step", to_string(sv.step)},
           {"phase", to_string(sv.phase)},
           {"mode", to_string(sv.mode)}};
    if (accepted) j["accepted"] = *accepted;
    if (!detail.empty()) j["detail"] = detail;
    out_ << j.dump() << '\n';
  }
  void transition(const LogEntry& e) {
    if (!out_.is_open()) return;
    out_ << json{{"time", e.time},
                 {"kind", "transition"},
                 {"source", "supervisor"},
                 {"event", e.event},
                 {"step", to_string(e.step)},
                 {"phase", to_string(e.phase)},
                 {"mode", to_string(e.mode)}}
                .dump()
         << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace

RunReport run_scenario(const ScenarioSpec& spec, const RunOptions& opt) {
  const double dt = spec.dt;
  const PlantWorld& world = spec.world;
  const SupervisorConfig cfg = spec.supervisor_config();
  FaultInjection faults = spec.fault_injection(spec.seed);
  TeleopMapping mapping = spec.teleop;
  FeedbackParams feedback_params = spec.feedback;

  PlantState plant = PlantState::at_rest(world, spec.home_joints, faults, spec.seed);
  SupervisorState sv = SupervisorState::initial(plant);
  AdmittanceState adm = AdmittanceState::at_rest(plant.socket_pose, plant.time);
  Pose held = plant.socket_pose;  // reference the follower holds
  Pose commanded = plant.socket_pose;
  BdcCommand bdc_cmd;
  BdcStatus bdc;
  double bdc_velocity = 0.0;
  bool teleop_on = false;
  TeleopState teleop;
  Pose device;
  bool clutch = false;
  Wrench feedback;
  std::vector<PlantEvent> plant_events;
  ScriptedOperator op(spec.timeline);
  ReportFold fold(spec.goal);
  const RateLimiter limiter(1.0 / dt, opt.rate_limit);

  RunReport report;
  report.scenario = spec.name;
  report.variant = spec.variant;
  report.seed = spec.seed;
  report.expected = spec.expected_outcome;

  std::ofstream telemetry_out;
  fs::path events_path;
  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    events_path = opt.out_dir / "events.jsonl";
    report.event_log_path = events_path.string();
    if (opt.write_telemetry) {
      report.telemetry_path = (opt.out_dir / "telemetry.jsonl").string();
      telemetry_out.open(report.telemetry_path);
    }
  }
  EventWriter events(events_path);
  std::size_t logged = 0;
  auto flush_transitions = [&] {
    for (; logged < sv.event_log.size(); ++logged) events.transition(sv.event_log[logged]);
  };
  flush_transitions();

  auto apply = [&](const std::vector<Action>& actions) {
    for (const Action& a : actions) {
      std::visit(overloaded{
                     [&](const StopMotion&) { held = plant.socket_pose; },
                     [&](const LoadTrajectory&) {},
                     [&](const IssueBdcCommand& c) { bdc_cmd = c.command; },
                     [&](const EnableTeleop&) {
                       teleop_on = true;
                       teleop = TeleopState{};
                     },
                     [&](const DisableTeleop&) {
                       teleop_on = false;
                       teleop = TeleopState{};
                       clutch = false;
                     },
                     [&](const SetMode&) {},
                     [&](const IdentifyBolt&) {
                       plant_events.push_back(PlantEvent{PlantEvent::Kind::BoltIdentified,
                                                         identify_bolt(world.bolt, faults)});
                     },
                     [&](const ResetSafety&) {
                       plant = reset_safety(plant);
                       adm = AdmittanceState::at_rest(plant.socket_pose, plant.time);
                       held = plant.socket_pose;
                     },
                 },
                 a);
    }
  };

  auto submit = [&](const SupervisorEvent& ev, const std::string& source) {
    SupervisorResult r = sv_handle(sv, ev, plant, cfg);
    if (r.rejection) {
      events.write(plant.time, "request", source, event_name(ev), sv, false, *r.rejection);
      return;
    }
    events.write(plant.time, "request", source, event_name(ev), r.state, true);
    sv = std::move(r.state);
    apply(r.actions);
    flush_transitions();
  };

  auto apply_jog = [&](const DeviceJog& j) {
    device = Pose(device.position() + j.translation,
                  quat_from_rotation_vector(j.rotation) * device.orientation());
    clutch = j.clutch;
  };

  auto apply_param = [&](const ParamUpdate& p, const std::string& source) {
    bool ok = std::isfinite(p.value);
    if (ok && p.name == "teleop.motion_scale" && p.value > 0)
      mapping.motion_scale = p.value;
    else if (ok && p.name == "teleop.engage_angle_tolerance" && p.value > 0)
      mapping.engage_angle_tolerance = p.value;
    else if (ok && p.name == "teleop.force_cap" && p.value >= 0)
      feedback_params.force_cap = p.value;
    else
      ok = false;
    events.write(plant.time, "param", source, p.name, sv, ok, fmt(p.value));
  };

  const auto wall_start = std::chrono::steady_clock::now();
  for (std::uint64_t tick = 0;; ++tick) {
    const Pose bolt_now = physical_bolt_pose(world.bolt, faults);

    // (1) events raised by the plant side last tick
    auto pending = std::move(plant_events);
    plant_events.clear();
    for (const PlantEvent& e : pending) submit(e, "plant");

    // (2) scripted operator
    Observation obs;
    obs.time = plant.time;
    obs.dt = dt;
    obs.plant = &plant;
    obs.supervisor = &sv;
    obs.bolt_pose = bolt_now;
    obs.reference = held;
    obs.device = device;
    obs.teleop_enabled = teleop_on;
    obs.teleop_engaged = teleop.engaged;
    obs.mapping = mapping;
    obs.target_torque = world.bolt.target_torque;
    const OperatorOutput o = op.tick(obs);
    for (const FaultPatch& f : o.injections) {
      if (f.driver_dead) faults.driver_dead = *f.driver_dead;
      if (f.identification_offset) faults.identified_pose_offset = *f.identification_offset;
      events.write(plant.time, "fault", "operator",
                   f.driver_dead ? "driver_dead" : "identification_offset", sv);
    }
    for (const std::string& n : o.notes) events.write(plant.time, "note", "operator", n, sv);
    for (OperatorEvent e : o.events) submit(e, "operator");
    for (const DeviceJog& j : o.jogs) apply_jog(j);

    // (3) live commands
    if (opt.commands) {
      for (CommandEnvelope& env : opt.commands->drain()) {
        std::visit(overloaded{
                       [&](OperatorEvent e) { submit(e, env.client_id); },
                       [&](const DeviceJog& j) { apply_jog(j); },
                       [&](const ParamUpdate& p) { apply_param(p, env.client_id); },
                   },
                   env.command);
      }
    }

    // (4) supervisor poll
    {
      SupervisorResult r = sv_tick(std::move(sv), plant, bdc, cfg);
      sv = std::move(r.state);
      apply(r.actions);
      flush_transitions();
    }

    // (5) reference: planned trajectory, else teleoperation, else hold
    if (sv.trajectory) {
      held = sample(*sv.trajectory, plant.time + dt - sv.trajectory_start);
    } else if (teleop_on) {
      TeleopTick t = teleop_tick(teleop, InputDeviceSample{device, clutch, plant.time},
                                 plant.socket_pose, held, mapping);
      teleop = std::move(t.state);
      if (t.reference) held = *t.reference;
    }

    // (6) compliance; a protective stop holds the arm where it is
    if (plant.safety_tripped) {
      adm = AdmittanceState::at_rest(plant.socket_pose, plant.time);
      commanded = plant.socket_pose;
    } else {
      const AdmittanceOutput a =
          spec.rigid_mode
              ? rigid_update(adm, spec.admittance, held, dt, plant.time)
              : admittance_update(adm, spec.admittance, held,
                                  plant.contact_wrench.rotated(plant.socket_pose.orientation()), dt,
                                  plant.time);
      adm = a.state;
      commanded = a.commanded_pose;
    }

    if (spec.faults.driver_dead_from_step && !faults.driver_dead &&
        static_cast<int>(sv.step) >= static_cast<int>(*spec.faults.driver_dead_from_step) &&
        sv.started) {
      faults.driver_dead = true;
      events.write(plant.time, "fault", "runner", "driver_dead", sv);
    }

    // (7) bolt driver, on last tick's measurements
    const double drive_torque = plant.engagement_depth > 0.0 ? plant.bolt_torque : 0.0;
    const BdcOutput b = bdc_tick(bdc, bdc_cmd, drive_torque, plant.driver_angle, dt);
    bdc = b.status;
    bdc_velocity = b.velocity;

    // (8) world
    plant = step(plant, commanded, bdc_velocity, faults, dt, world);

    // (9) haptic feedback
    feedback = (teleop_on && teleop.engaged)
                   ? feedback_force(adm, feedback_params, mapping.camera_alignment)
                   : Wrench{};

    // (10) telemetry
    TelemetryFrame f;
    f.seq = tick + 1;
    f.time = plant.time;
    f.joints = plant.joints;
    f.socket_pose = plant.socket_pose;
    f.socket_twist = plant.socket_twist;
    f.wrench = plant.contact_wrench;
    f.bolt_rotation = plant.bolt_rotation;
    f.bolt_torque = plant.bolt_torque;
    f.driver_angle = plant.driver_angle;
    f.engagement_depth = plant.engagement_depth;
    f.normal_force = plant.normal_force;
    f.lateral_error = lateral_error(plant.socket_pose, bolt_now);
    f.safety_tripped = plant.safety_tripped;
    f.self_collision = plant.self_collision;
    f.step = sv.step;
    f.phase = sv.phase;
    f.mode = sv.mode;
    f.pipeline_complete = sv.pipeline_complete;
    f.legal_events = legal_events(sv);
    f.reference_pose = held;
    f.commanded_pose = commanded;
    f.bdc = BdcSummary::of(bdc, bdc_velocity);
    f.feedback_wrench = feedback;
    f.teleop_engaged = teleop_on && teleop.engaged;
    f.bolt_pose = bolt_now;
    f.target_torque = world.bolt.target_torque;
    if (sv.trajectory)
      for (const TrajectorySample& s : sv.trajectory->samples()) f.trajectory.push_back(s.pose);
    fold.add(f);
    if (telemetry_out.is_open() || (opt.live && limiter.due(tick))) {
      const std::string line = encode_telemetry(f);
      if (telemetry_out.is_open()) telemetry_out << line << '\n';
      if (opt.live && limiter.due(tick)) opt.live->publish(f.seq, line);
    }

    if (opt.realtime) {
      std::this_thread::sleep_until(wall_start +
                                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(plant.time)));
    }

    // (11) termination
    std::string end;
    if (f.self_collision)
      end = "SelfCollision";
    else if (goal_reached(spec.goal, f))
      end = "GoalReached";
    else if (spec.goal.end_on_safety_trip && f.safety_tripped)
      end = "SafetyTrip";
    else if (plant.time >= spec.duration_limit - 1e-9)
      end = "DurationLimit";
    if (!end.empty()) {
      events.write(plant.time, "end", "runner", end, sv);
      break;
    }
  }

  report = fold.finish(report);
  if (!opt.out_dir.empty()) {
    std::ofstream(opt.out_dir / "report.json") << report.to_json().dump(2) << '\n';
  }
  return report;
}

std::string runs_csv(const std::vector<RunReport>& runs) {
  std::ostringstream o;
  o << "scenario,variant,seed,outcome,expected_outcome,expected_matched,peak_normal_force,"
       "final_bolt_torque,coupling_error,safety_trip_count,duration\n";
  for (const RunReport& r : runs) {
    o << r.scenario << ',' << r.variant << ',' << r.seed << ',' << to_string(r.outcome) << ','
      << (r.expected ? to_string(*r.expected) : "") << ',' << (r.expected_matched() ? 1 : 0) << ','
      << fmt(r.peak_normal_force) << ',' << fmt(r.final_bolt_torque) << ','
      << (r.coupling_error ? fmt(*r.coupling_error) : "") << ',' << r.safety_trip_count << ','
      << fmt(r.duration) << '\n';
  }
  return o.str();
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& x) {
  if (x.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  if (x.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return {m, std::sqrt(s / static_cast<double>(x.size() - 1))};
}

}  // namespace

std::string summary_csv(const std::vector<RunReport>& runs) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const RunReport*>> groups;
  for (const RunReport& r : runs) {
    const auto key = std::make_pair(r.scenario, r.variant);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::ostringstream o;
  o << "scenario,variant,runs,success,safety_trip,self_collision,timeout,trip_rate,"
       "peak_normal_force_mean,peak_normal_force_std,final_bolt_torque_mean,"
       "final_bolt_torque_std,expected_matched\n";
  for (const auto& key : order) {
    const auto& g = groups[key];
    std::map<Outcome, int> count;
    int tripped = 0, matched = 0;
    std::vector<double> force, torque;
    for (const RunReport* r : g) {
      ++count[r->outcome];
      tripped += r->safety_trip_count > 0;
      matched += r->expected_matched();
      force.push_back(r->peak_normal_force);
      torque.push_back(r->final_bolt_torque);
    }
    const auto [fm, fs_] = mean_std(force);
    const auto [tm, ts] = mean_std(torque);
    o << key.first << ',' << key.second << ',' << g.size() << ',' << count[Outcome::Success] << ','
      << count[Outcome::SafetyTrip] << ',' << count[Outcome::SelfCollision] << ','
      << count[Outcome::Timeout] << ',' << fmt(static_cast<double>(tripped) / g.size()) << ','
      << fmt(fm) << ',' << fmt(fs_) << ',' << fmt(tm) << ',' << fmt(ts) << ',' << matched << '\n';
  }
  return o.str();
}

BatchResult run_batch(const std::vector<ScenarioSpec>& specs, int n, std::uint64_t seed_base,
                      const RunOptions& options) {
  if (n < 1) throw std::invalid_argument("batch size must be >= 1");
  BatchResult out;
  for (const ScenarioSpec& base : specs) {
    const std::string label = base.variant.empty() ? base.name : base.name + "-" + base.variant;
    for (int i = 0; i < n; ++i) {
      ScenarioSpec s = base;
      s.seed = seed_base + static_cast<std::uint64_t>(i);
      RunOptions o = options;
      if (!options.out_dir.empty())
        o.out_dir = options.out_dir / label / ("seed_" + std::to_string(s.seed));
      out.runs.push_back(run_scenario(s, o));
    }
  }
  out.runs_csv = runs_csv(out.runs);
  out.summary_csv = summary_csv(out.runs);
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    std::ofstream(options.out_dir / "runs.csv") << out.runs_csv;
    std::ofstream(options.out_dir / "summary.csv") << out.summary_csv;
  }
  return out;
}

}  // namespace bolting
