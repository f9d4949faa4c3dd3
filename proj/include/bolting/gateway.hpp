#pragma once

// Wire protocol between the control loop and operator clients. Everything
// here is transport-agnostic; the WebSocket server lives in ws_server.hpp.
//
// Envelope: {"type": "...", "seq": n, "data": {...}}. Field layout is
// documented in docs/protocol.md.

#include "bolting/bolt_driver.hpp"
#include "bolting/geometry.hpp"
#include "bolting/kinematics.hpp"
#include "bolting/supervisor.hpp"

#include <json.hpp>

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bolting {

struct BdcSummary {
  BdcMode mode = BdcMode::Idle;
  double measured_torque = 0.0;
  double rotated = 0.0;
  bool complete = false;
  bool interrupted = false;
  bool driver_fault = false;
  std::int64_t command_id = -1;
  double velocity = 0.0;  // commanded this tick, rad/s

  static BdcSummary of(const BdcStatus& s, double velocity);
  bool operator==(const BdcSummary&) const = default;
};

/// One self-contained snapshot of the loop. Frames never carry deltas.
struct TelemetryFrame {
  std::uint64_t seq = 0;
  double time = 0.0;

  // plant
  Joints joints = Joints::Zero();
  Pose socket_pose;
  Twist socket_twist;
  Wrench wrench;  // wrist sensor, tool frame
  double bolt_rotation = 0.0;
  double bolt_torque = 0.0;
  double driver_angle = 0.0;
  double engagement_depth = 0.0;
  double normal_force = 0.0;
  double lateral_error = 0.0;
  bool safety_tripped = false;
  bool self_collision = false;

  // supervisor
  Step step = Step::Approach;
  Phase phase = Phase::Idle;
  ControlMode mode = ControlMode::Automatic;
  bool pipeline_complete = false;
  std::vector<OperatorEvent> legal_events;

  // control
  Pose reference_pose;
  Pose commanded_pose;
  BdcSummary bdc;
  Wrench feedback_wrench;
  bool teleop_engaged = false;
  Pose bolt_pose;  // where the bolt physically is
  double target_torque = 0.0;
  /// Waypoints of the active trajectory, empty when none.
  std::vector<Pose> trajectory;
};

bool same_frame(const TelemetryFrame& a, const TelemetryFrame& b);

struct DeviceJog {
  Vec3 translation = Vec3::Zero();  // m, base frame of the device
  Vec3 rotation = Vec3::Zero();     // rotation vector, rad
  bool clutch = true;
};

struct ParamUpdate {
  std::string name;
  double value = 0.0;
};

using Command = std::variant<OperatorEvent, DeviceJog, ParamUpdate>;

struct CommandEnvelope {
  Command command;
  std::string client_id;
  std::int64_t seq = 0;
  double time = 0.0;
};

class MalformedMessage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StaleSequence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json pose_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j);

nlohmann::json frame_data(const TelemetryFrame& f);
TelemetryFrame frame_from_data(const nlohmann::json& data, std::uint64_t seq);

/// Full envelope, one line of JSON without a trailing newline.
std::string encode_telemetry(const TelemetryFrame& f);
TelemetryFrame decode_telemetry(std::string_view raw);

/// Static scene description sent once per connection.
std::string encode_hello(const RobotModel& robot, const Pose& bolt_pose, double head_across_flats,
                         double head_height, double force_threshold, double loop_hz,
                         double rate_limit);

std::string encode_command(const CommandEnvelope& env);
std::string encode_error(std::string_view message, std::int64_t seq);

/// Schema check plus per-client sequence dedup.
class Ingestor {
 public:
  /// Throws MalformedMessage or StaleSequence; neither touches the dedup state.
  CommandEnvelope ingest(std::string_view raw, const std::string& client_id);
  void forget(const std::string& client_id) { last_seq_.erase(client_id); }

 private:
  std::map<std::string, std::int64_t> last_seq_;
};

/// Gateway to loop: multi-producer, single-consumer, FIFO per producer.
class CommandQueue {
 public:
  void push(CommandEnvelope env);
  std::vector<CommandEnvelope> drain();
  std::size_t size() const;
  /// Blocks until something is queued or the timeout expires.
  bool wait_for_item(double timeout_s);

 private:
  mutable std::mutex m_;
  std::condition_variable cv_;
  std::deque<CommandEnvelope> q_;
};

/// Loop to gateway: the loop overwrites, readers take the latest.
class TelemetryBuffer {
 public:
  void publish(std::uint64_t seq, std::string encoded);
  /// Latest frame newer than `after_seq`, if any.
  std::optional<std::pair<std::uint64_t, std::string>> latest_after(std::uint64_t after_seq) const;

 private:
  mutable std::mutex m_;
  std::uint64_t seq_ = 0;
  bool has_ = false;
  std::string data_;
};

/// Latest-wins downsampling of a fixed-rate loop.
class RateLimiter {
 public:
  RateLimiter(double loop_hz, double limit_hz);
  bool due(std::uint64_t tick) const { return tick % stride_ == 0; }
  std::uint64_t stride() const { return stride_; }

 private:
  std::uint64_t stride_;
};

}  // namespace bolting
