#pragma once

// Headless 500 Hz loop: plant, admittance, bolt driver, teleop and
// supervisor wired together, driven by the scripted operator and, when
// serving, by gateway commands. Writes telemetry/event JSONL and a report.

#include "bolting/gateway.hpp"
#include "bolting/scenario_spec.hpp"
#include "bolting/scripted_operator.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bolting {

struct RunOptions {
  std::filesystem::path out_dir;  // empty: nothing is written
  bool write_telemetry = true;
  /// Live observation: frames go to `live` at `rate_limit`, commands are
  /// drained from `commands` every tick.
  TelemetryBuffer* live = nullptr;
  CommandQueue* commands = nullptr;
  double rate_limit = 30.0;  // Hz
  bool realtime = false;     // pace the loop to wall-clock time
};

struct RunReport {
  std::string scenario;
  std::string variant;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Timeout;
  std::optional<Outcome> expected;
  double peak_normal_force = 0.0;   // N
  double final_bolt_torque = 0.0;   // N*m
  /// Lateral socket/bolt error when Coupling was left, if it was reached.
  std::optional<double> coupling_error;
  int safety_trip_count = 0;  // rising edges of the latch
  double duration = 0.0;      // simulated s
  std::uint64_t frames = 0;
  std::string telemetry_path;
  std::string event_log_path;

  bool expected_matched() const { return !expected || *expected == outcome; }
  nlohmann::json to_json() const;
};

/// Report as a fold over telemetry frames: the outcome is a pure function
/// of the frames and the goal.
class ReportFold {
 public:
  explicit ReportFold(Goal goal) : goal_(goal) {}
  void add(const TelemetryFrame& f);
  /// Fills the log-derived fields of `base`.
  RunReport finish(RunReport base) const;

 private:
  Goal goal_;
  bool any_ = false;
  bool goal_reached_ = false;
  bool self_collision_ = false;
  bool prev_tripped_ = false;
  int trips_ = 0;
  double peak_force_ = 0.0;
  double last_torque_ = 0.0;
  double last_time_ = 0.0;
  std::uint64_t frames_ = 0;
  std::optional<double> coupling_error_;
};

bool goal_reached(const Goal& goal, const TelemetryFrame& f);

/// Recomputes a report from a telemetry JSONL file.
RunReport report_from_log(const std::filesystem::path& telemetry, const Goal& goal);

/// One run with the spec's seed.
RunReport run_scenario(const ScenarioSpec& spec, const RunOptions& options = {});

struct BatchResult {
  std::vector<RunReport> runs;
  std::string runs_csv;
  std::string summary_csv;
};

/// `n` runs per spec with seeds seed_base .. seed_base + n - 1, each writing
/// into out_dir/<variant>/seed_<s>/. Writes runs.csv and summary.csv into
/// out_dir when it is set.
BatchResult run_batch(const std::vector<ScenarioSpec>& specs, int n, std::uint64_t seed_base,
                      const RunOptions& options = {});

std::string runs_csv(const std::vector<RunReport>& runs);
std::string summary_csv(const std::vector<RunReport>& runs);

/// Static scene message for a spec (see encode_hello).
std::string hello_for(const ScenarioSpec& spec, double rate_limit);

}  // namespace bolting
