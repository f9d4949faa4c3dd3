// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all
// pass. Scenario specs come from BOLTING_SCENARIO_DIR.

#include "bolting/scenario.hpp"

#include "oracles.hpp"
#include "supervisor_harness.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

using namespace bolting;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kScenarios = BOLTING_SCENARIO_DIR;

int failures = 0;

void verdict(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("bolting_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

std::vector<TelemetryFrame> read_frames(const fs::path& p) {
  std::ifstream in(p);
  std::vector<TelemetryFrame> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(decode_telemetry(line));
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every regular file under `root`, keyed by relative path. report.json names
// its own output directory, so the two path fields are dropped.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string data = slurp(e.path());
    if (e.path().filename() == "report.json") {
      json j = json::parse(data);
      j.erase("telemetry_path");
      j.erase("event_log_path");
      data = j.dump();
    }
    files[fs::relative(e.path(), root).generic_string()] = std::move(data);
  }
  return files;
}

void compliance_ab() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path spec = kScenarios / "exp_compliance_ab.json";
  RunOptions opt;
  opt.write_telemetry = false;
  const ScenarioSpec a = load_spec(spec, "A"), b = load_spec(spec, "B");
  const BatchResult ra = run_batch({a}, 20, a.seed, opt);
  const BatchResult rb = run_batch({b}, 20, b.seed, opt);
  const double wall = seconds_since(t0);

  int trips_a = 0, trips_b = 0;
  double force_a = 0, force_b = 0;
  for (const RunReport& r : ra.runs) {
    trips_a += r.safety_trip_count > 0;
    force_a += r.peak_normal_force / ra.runs.size();
  }
  for (const RunReport& r : rb.runs) {
    trips_b += r.safety_trip_count > 0;
    force_b += r.peak_normal_force / rb.runs.size();
  }
  const double mis = a.faults.misalignment;
  const bool ok = ra.runs.size() == 20 && rb.runs.size() == 20 && trips_b == 20 && trips_a == 0 &&
                  force_a <= 0.5 * force_b && wall < 60.0 && mis == 0.005 && b.faults.misalignment == mis;
  verdict(ok, "compliance A/B",
          fmt("misalignment %.3f m; trips rigid %d/20, admittance %d/20; mean peak force "
              "admittance %.3f N vs rigid %.3f N (ratio %.3f <= 0.5); %.1f s < 60 s",
              mis, trips_b, trips_a, force_a, force_b, force_a / force_b, wall));
}

void vision_fault() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioSpec spec = load_spec(kScenarios / "exp_vision_fault.json");
  RunOptions opt;
  opt.out_dir = scratch("vision");
  const RunReport r = run_scenario(spec, opt);
  const double wall = seconds_since(t0);

  double coupling_exec = -1, takeover = -1;
  for (const json& e : read_jsonl(r.event_log_path)) {
    if (coupling_exec < 0 && e["kind"] == "transition" && e["step"] == "Coupling" &&
        e["phase"] == "Executing")
      coupling_exec = e["time"];
    if (takeover < 0 && e["kind"] == "request" && e["event"] == "TakeManualControl" &&
        e["accepted"] == true)
      takeover = e["time"];
  }
  // the frame the operator was looking at when taking over
  double error_at_takeover = 0, manual_engagement = 0;
  for (const TelemetryFrame& f : read_frames(r.telemetry_path)) {
    if (std::abs(f.time - takeover) < 0.5 * spec.dt) error_at_takeover = f.lateral_error;
    if (f.step == Step::Coupling && f.mode == ControlMode::Manual)
      manual_engagement = std::max(manual_engagement, f.engagement_depth);
  }
  const double offset = spec.faults.identification_offset.position().norm();
  const bool ok = std::abs(offset - 0.02) < 1e-12 && coupling_exec >= 0 && takeover > coupling_exec &&
                  error_at_takeover > 0.01 && manual_engagement >= 0.002 &&
                  r.outcome == Outcome::Success && wall < 30.0;
  verdict(ok, "vision-fault handover",
          fmt("offset %.3f m; coupling executing at %.3f s, TakeManualControl at %.3f s with "
              "lateral error %.4f m > 0.01; manual engagement %.4f m >= 0.002; outcome %s; "
              "%.1f s < 30 s",
              offset, coupling_exec, takeover, error_at_takeover, manual_engagement,
              to_string(r.outcome), wall));
}

void driver_fault() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path path = kScenarios / "exp_driver_fault.json";
  const ScenarioSpec manual = load_spec(path, "manual");
  const ScenarioSpec collide = load_spec(path, "self_collision");
  RunOptions opt;
  opt.out_dir = scratch("driver_manual");
  const RunReport rm = run_scenario(manual, opt);
  const RunReport rm2 = run_scenario(manual);
  opt.out_dir = scratch("driver_collision");
  opt.write_telemetry = false;
  const RunReport rc = run_scenario(collide, opt);
  const double wall = seconds_since(t0);

  std::optional<std::uint64_t> first_drive, first_fault;
  for (const TelemetryFrame& f : read_frames(rm.telemetry_path)) {
    if (!first_drive && f.step == Step::Tightening && f.bdc.velocity != 0.0) first_drive = f.seq;
    if (!first_fault && f.bdc.driver_fault) first_fault = f.seq;
  }
  int reseats = 0;
  for (const json& e : read_jsonl(rm.event_log_path))
    if (e["kind"] == "note" && e["event"].get<std::string>().find("re-seated") != std::string::npos)
      ++reseats;
  const long latency = first_drive && first_fault
                           ? static_cast<long>(*first_fault) - static_cast<long>(*first_drive)
                           : -1;
  const double target = manual.world.bolt.target_torque;
  const double bound =
      torque_overshoot_bound(manual.drive_velocity, manual.world.bolt.thread_stiffness, manual.dt);
  const bool torque_ok = rm.final_bolt_torque >= target && rm.final_bolt_torque <= target + bound;
  const bool ok = manual.faults.driver_dead_from_step == Step::Tightening && latency >= 0 &&
                  latency * manual.dt <= 0.1 + 1e-12 && reseats >= 1 && torque_ok &&
                  rm.outcome == Outcome::Success && rm2.outcome == Outcome::Success &&
                  rm2.final_bolt_torque == rm.final_bolt_torque &&
                  rc.outcome == Outcome::SelfCollision && wall < 60.0;
  verdict(ok, "driver-failure manual tightening",
          fmt("driver_fault %ld ticks (%.3f s <= 0.1 s) after first drive command; %d re-seats "
              "between strokes; final torque %.6f in [%.3f, %.3f]; outcome %s twice, identical; "
              "self-collision variant %s; %.1f s < 60 s",
              latency, latency * manual.dt, reseats, rm.final_bolt_torque, target, target + bound,
              to_string(rm.outcome), to_string(rc.outcome), wall));
}

void admittance_oracle() {
  const AdmittanceParams p;
  const double dt = 0.002, force = 1.0;
  const double m = p.virtual_mass[0], d = p.virtual_damping[0], k = p.virtual_stiffness[0];

  AdmittanceState s = AdmittanceState::at_rest(Pose());
  using S = Eigen::Vector2d;
  const std::function<S(double, const S&)> ode = [&](double, const S& x) {
    return S(x[1], (force - d * x[1] - k * x[0]) / m);
  };
  S x = S::Zero();
  const double h = 1e-5;
  const int per_tick = static_cast<int>(std::lround(dt / h));
  Vec6 w = Vec6::Zero();
  w[0] = force;
  double max_dev = 0;
  for (int i = 0; i < 500; ++i) {
    const AdmittanceOutput out = admittance_update(s, p, Pose(), Wrench::from_stacked(w), dt);
    s = out.state;
    for (int j = 0; j < per_tick; ++j) x = oracle::rk4_step(ode, 0.0, x, h);
    max_dev = std::max(max_dev, std::abs(out.commanded_pose.position().x() - x[0]));
  }

  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  long ticks = 0, increases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    AdmittanceState z = AdmittanceState::at_rest(Pose());
    z.virtual_pose = Pose(Vec3(u(rng), u(rng), u(rng)) * 0.02,
                          quat_from_rotation_vector(Vec3(u(rng), u(rng), u(rng)) * 0.1));
    z.virtual_twist = Twist{Vec3(u(rng), u(rng), u(rng)) * 0.1, Vec3(u(rng), u(rng), u(rng)) * 0.5};
    double e = admittance_energy(z, p);
    for (int i = 0; i < 2000; ++i, ++ticks) {
      z = admittance_update(z, p, std::nullopt, Wrench{}, dt).state;
      const double next = admittance_energy(z, p);
      if (next > e * (1.0 + 1e-12) + 1e-18) ++increases;
      e = next;
    }
  }
  verdict(max_dev <= 1e-5 && increases == 0, "admittance oracle",
          fmt("1 N step over 1 s: max deviation from RK4(1e-5 s) %.3e m <= 1e-5; energy increased "
              "on %ld of %ld zero-wrench ticks",
              max_dev, increases, ticks));
}

void supervisor_properties() {
  const harness::Tally t = harness::model_check(10000, 20240611);
  const bool ok = t.sequences == 10000 && t.unvalidated_advances == 0 && t.bad_mode_switches == 0 &&
                  t.replay_mismatches == 0 && t.step_advances > 0 && t.mode_switches > 0;
  verdict(ok, "supervisor properties",
          fmt("%ld sequences; %ld step advances, %ld without Validate; %ld mode switches, %ld "
              "outside SwitchingMode or above 1e-3 m/s; %ld replay mismatches",
              t.sequences, t.step_advances, t.unvalidated_advances, t.mode_switches,
              t.bad_mode_switches, t.replay_mismatches));
}

void bdc_properties() {
  const double dt = 0.002;
  std::mt19937_64 rng(73);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int within = 0, prompt_stops = 0;
  double worst = 0;  // largest overshoot / bound
  for (int run = 0; run < 100; ++run) {
    BoltModel bolt;
    bolt.free_run_angle = 3.0 * u(rng);
    bolt.thread_stiffness = 1.0 + 9.0 * u(rng);
    const double target = 2.0 + 10.0 * u(rng);
    const double v = 0.5 + 3.0 * u(rng);
    const double bound = torque_overshoot_bound(v, bolt.thread_stiffness, dt);

    // to completion
    BdcStatus st;
    double encoder = 0;
    const BdcCommand cmd = BdcCommand::tighten(target, v, 1);
    int driving_ticks = 0;
    for (int tick = 0; tick < 100000 && !st.complete; ++tick, ++driving_ticks) {
      const BdcOutput o = bdc_tick(st, cmd, thread_torque(bolt, encoder), encoder, dt);
      st = o.status;
      encoder += o.velocity * dt;
    }
    const double overshoot = thread_torque(bolt, encoder) - target;
    worst = std::max(worst, overshoot / bound);
    within += st.complete && overshoot >= 0.0 && overshoot <= bound;

    // again, stopped while still driving: nothing moves from the tick that sees Stop
    st = BdcStatus{};
    encoder = 0;
    const int stop_at = 1 + static_cast<int>(u(rng) * (driving_ticks - 2));
    bool prompt = true;
    for (int tick = 0; tick < stop_at + 20; ++tick) {
      const BdcCommand c = tick < stop_at ? cmd : BdcCommand::stop(2);
      const BdcOutput o = bdc_tick(st, c, thread_torque(bolt, encoder), encoder, dt);
      if (tick >= stop_at && o.velocity != 0.0) prompt = false;
      if (tick == stop_at - 1 && o.velocity == 0.0) prompt = false;
      st = o.status;
      encoder += o.velocity * dt;
    }
    prompt_stops += prompt && st.interrupted;
  }
  verdict(within == 100 && prompt_stops == 100, "BDC properties",
          fmt("%d/100 tightenings end within k*v*dt of target (worst %.3f of the bound); %d/100 "
              "stops zero the output on the tick that processes them",
              within, worst, prompt_stops));
}

void determinism() {
  const fs::path spec = kScenarios / "exp_compliance_ab.json";
  const std::vector<ScenarioSpec> specs{load_spec(spec, "A"), load_spec(spec, "B")};
  RunOptions o1, o2;
  o1.out_dir = scratch("det1");
  o2.out_dir = scratch("det2");
  const BatchResult b1 = run_batch(specs, 3, 11, o1);
  const BatchResult b2 = run_batch(specs, 3, 11, o2);
  const auto t1 = tree(o1.out_dir), t2 = tree(o2.out_dir);
  std::size_t bytes = 0, logs = 0;
  for (const auto& [name, data] : t1) {
    bytes += data.size();
    logs += name.ends_with("telemetry.jsonl");
  }
  const bool ok = t1 == t2 && logs == 6 && t1.count("runs.csv") && t1.count("summary.csv") &&
                  b1.runs_csv == b2.runs_csv;
  verdict(ok, "determinism",
          fmt("two run_batch calls (2 variants x 3 seeds): %zu files, %zu bytes, %zu telemetry "
              "logs, byte-identical: %s",
              t1.size(), bytes, logs, t1 == t2 ? "yes" : "no"));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> criteria{
      {"compliance A/B", compliance_ab},
      {"vision-fault handover", vision_fault},
      {"driver-failure manual tightening", driver_fault},
      {"admittance oracle", admittance_oracle},
      {"supervisor properties", supervisor_properties},
      {"BDC properties", bdc_properties},
      {"determinism", determinism}};
  for (const auto& [name, check] : criteria) {
    try {
      check();
    } catch (const std::exception& e) {
      verdict(false, name, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
