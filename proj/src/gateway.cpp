#include "bolting/gateway.hpp"

#include <chrono>
#include <cmath>

namespace bolting {

using nlohmann::json;

namespace {

template <std::size_t N>
json arr(const std::array<double, N>& a) {
  return json(a);
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::vector<double> numbers(const json& j, std::size_t n, const char* what) {
  if (!j.is_array() || j.size() != n)
    throw MalformedMessage(std::string(what) + ": expected an array of " + std::to_string(n));
  std::vector<double> out;
  for (const json& x : j) {
    if (!x.is_number()) throw MalformedMessage(std::string(what) + ": non-numeric entry");
    out.push_back(x.get<double>());
  }
  return out;
}

Vec3 vec_from(const json& j, const char* what) {
  const auto v = numbers(j, 3, what);
  return Vec3(v[0], v[1], v[2]);
}

Wrench wrench_from(const json& j, const char* what) {
  return Wrench::from_array(numbers(j, 6, what));
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw MalformedMessage(std::string("missing field ") + key);
  return j.at(key);
}

template <class E>
E enum_field(const json& j, const char* key, std::optional<E> (*parse)(std::string_view)) {
  const json& v = field(j, key);
  if (!v.is_string()) throw MalformedMessage(std::string(key) + " must be a string");
  const auto e = parse(v.get<std::string>());
  if (!e) throw MalformedMessage(std::string("unknown ") + key + " " + v.get<std::string>());
  return *e;
}

std::optional<BdcMode> bdc_mode_from_string(std::string_view s) {
  for (BdcMode m : {BdcMode::Idle, BdcMode::TightenToTorque, BdcMode::RotateBy, BdcMode::Stop})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

json parse_or_throw(std::string_view raw) {
  json j = json::parse(raw.begin(), raw.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw MalformedMessage("not valid JSON");
  if (!j.is_object()) throw MalformedMessage("envelope must be an object");
  return j;
}

std::int64_t seq_of(const json& env) {
  const json& s = field(env, "seq");
  if (!s.is_number_integer()) throw MalformedMessage("seq must be an integer");
  return s.get<std::int64_t>();
}

std::string string_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) throw MalformedMessage(std::string(key) + " must be a string");
  return v.get<std::string>();
}

bool bool_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) throw MalformedMessage(std::string(key) + " must be a boolean");
  return v.get<bool>();
}

double number_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw MalformedMessage(std::string(key) + " must be a number");
  return v.get<double>();
}

}  // namespace

BdcSummary BdcSummary::of(const BdcStatus& s, double velocity) {
  return {s.mode,        s.measured_torque, s.rotated,    s.complete,
          s.interrupted, s.driver_fault,    s.command_id, velocity};
}

bool same_frame(const TelemetryFrame& a, const TelemetryFrame& b) {
  auto same_traj = [](const std::vector<Pose>& x, const std::vector<Pose>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].to_array() != y[i].to_array()) return false;
    return true;
  };
  return a.seq == b.seq && a.time == b.time && a.joints == b.joints &&
         a.socket_pose.to_array() == b.socket_pose.to_array() &&
         a.socket_twist.stacked() == b.socket_twist.stacked() && a.wrench == b.wrench &&
         a.bolt_rotation == b.bolt_rotation && a.bolt_torque == b.bolt_torque &&
         a.driver_angle == b.driver_angle && a.engagement_depth == b.engagement_depth &&
         a.normal_force == b.normal_force && a.lateral_error == b.lateral_error &&
         a.safety_tripped == b.safety_tripped && a.self_collision == b.self_collision &&
         a.step == b.step && a.phase == b.phase && a.mode == b.mode &&
         a.pipeline_complete == b.pipeline_complete && a.legal_events == b.legal_events &&
         a.reference_pose.to_array() == b.reference_pose.to_array() &&
         a.commanded_pose.to_array() == b.commanded_pose.to_array() && a.bdc == b.bdc &&
         a.feedback_wrench == b.feedback_wrench && a.teleop_engaged == b.teleop_engaged &&
         a.bolt_pose.to_array() == b.bolt_pose.to_array() && a.target_torque == b.target_torque &&
         same_traj(a.trajectory, b.trajectory);
}

json pose_json(const Pose& p) { return arr(p.to_array()); }

Pose pose_from_json(const json& j) { return Pose::from_array(numbers(j, 7, "pose")); }

json frame_data(const TelemetryFrame& f) {
  json legal = json::array();
  for (OperatorEvent e : f.legal_events) legal.push_back(to_string(e));
  json traj = json::array();
  for (const Pose& p : f.trajectory) traj.push_back(pose_json(p));
  std::vector<double> joints(f.joints.data(), f.joints.data() + 6);
  return json{
      {"time", f.time},
      {"plant",
       {{"joints", joints},
        {"socket_pose", pose_json(f.socket_pose)},
        {"socket_twist", {f.socket_twist.linear.x(), f.socket_twist.linear.y(),
                          f.socket_twist.linear.z(), f.socket_twist.angular.x(),
                          f.socket_twist.angular.y(), f.socket_twist.angular.z()}},
        {"bolt_rotation", f.bolt_rotation},
        {"driver_angle", f.driver_angle},
        {"engagement_depth", f.engagement_depth},
        {"normal_force", f.normal_force},
        {"lateral_error", f.lateral_error},
        {"safety_tripped", f.safety_tripped},
        {"self_collision", f.self_collision}}},
      {"supervisor",
       {{"step", to_string(f.step)},
        {"phase", to_string(f.phase)},
        {"mode", to_string(f.mode)},
        {"pipeline_complete", f.pipeline_complete},
        {"legal_events", legal}}},
      {"wrench", arr(f.wrench.to_array())},
      {"bolt_torque", f.bolt_torque},
      {"bdc",
       {{"mode", to_string(f.bdc.mode)},
        {"measured_torque", f.bdc.measured_torque},
        {"rotated", f.bdc.rotated},
        {"complete", f.bdc.complete},
        {"interrupted", f.bdc.interrupted},
        {"driver_fault", f.bdc.driver_fault},
        {"command_id", f.bdc.command_id},
        {"velocity", f.bdc.velocity}}},
      {"feedback_wrench", arr(f.feedback_wrench.to_array())},
      {"teleop_engaged", f.teleop_engaged},
      {"reference_pose", pose_json(f.reference_pose)},
      {"commanded_pose", pose_json(f.commanded_pose)},
      {"bolt_pose", pose_json(f.bolt_pose)},
      {"target_torque", f.target_torque},
      {"trajectory", traj},
  };
}

TelemetryFrame frame_from_data(const json& d, std::uint64_t seq) {
  TelemetryFrame f;
  f.seq = seq;
  f.time = number_field(d, "time");
  const json& p = field(d, "plant");
  const auto q = numbers(field(p, "joints"), 6, "joints");
  for (int i = 0; i < 6; ++i) f.joints[i] = q[i];
  f.socket_pose = pose_from_json(field(p, "socket_pose"));
  const auto tw = numbers(field(p, "socket_twist"), 6, "socket_twist");
  f.socket_twist = Twist{Vec3(tw[0], tw[1], tw[2]), Vec3(tw[3], tw[4], tw[5])};
  f.bolt_rotation = number_field(p, "bolt_rotation");
  f.driver_angle = number_field(p, "driver_angle");
  f.engagement_depth = number_field(p, "engagement_depth");
  f.normal_force = number_field(p, "normal_force");
  f.lateral_error = number_field(p, "lateral_error");
  f.safety_tripped = bool_field(p, "safety_tripped");
  f.self_collision = bool_field(p, "self_collision");

  const json& s = field(d, "supervisor");
  f.step = enum_field<Step>(s, "step", step_from_string);
  f.phase = enum_field<Phase>(s, "phase", phase_from_string);
  f.mode = enum_field<ControlMode>(s, "mode", mode_from_string);
  f.pipeline_complete = bool_field(s, "pipeline_complete");
  const json& legal = field(s, "legal_events");
  if (!legal.is_array()) throw MalformedMessage("legal_events must be an array");
  for (const json& e : legal) {
    const auto ev = e.is_string() ? operator_event_from_string(e.get<std::string>()) : std::nullopt;
    if (!ev) throw MalformedMessage("unknown legal event");
    f.legal_events.push_back(*ev);
  }

  f.wrench = wrench_from(field(d, "wrench"), "wrench");
  f.bolt_torque = number_field(d, "bolt_torque");
  const json& b = field(d, "bdc");
  f.bdc.mode = enum_field<BdcMode>(b, "mode", bdc_mode_from_string);
  f.bdc.measured_torque = number_field(b, "measured_torque");
  f.bdc.rotated = number_field(b, "rotated");
  f.bdc.complete = bool_field(b, "complete");
  f.bdc.interrupted = bool_field(b, "interrupted");
  f.bdc.driver_fault = bool_field(b, "driver_fault");
  const json& id = field(b, "command_id");
  if (!id.is_number_integer()) throw MalformedMessage("command_id must be an integer");
  f.bdc.command_id = id.get<std::int64_t>();
  f.bdc.velocity = number_field(b, "velocity");
  f.feedback_wrench = wrench_from(field(d, "feedback_wrench"), "feedback_wrench");
  f.teleop_engaged = bool_field(d, "teleop_engaged");
  f.reference_pose = pose_from_json(field(d, "reference_pose"));
  f.commanded_pose = pose_from_json(field(d, "commanded_pose"));
  f.bolt_pose = pose_from_json(field(d, "bolt_pose"));
  f.target_torque = number_field(d, "target_torque");
  const json& traj = field(d, "trajectory");
  if (!traj.is_array()) throw MalformedMessage("trajectory must be an array");
  for (const json& w : traj) f.trajectory.push_back(pose_from_json(w));
  return f;
}

std::string encode_telemetry(const TelemetryFrame& f) {
  return json{{"type", "telemetry"}, {"seq", f.seq}, {"data", frame_data(f)}}.dump();
}

TelemetryFrame decode_telemetry(std::string_view raw) {
  const json env = parse_or_throw(raw);
  if (string_field(env, "type") != "telemetry") throw MalformedMessage("not a telemetry message");
  const std::int64_t seq = seq_of(env);
  if (seq < 0) throw MalformedMessage("negative seq");
  return frame_from_data(field(env, "data"), static_cast<std::uint64_t>(seq));
}

std::string encode_hello(const RobotModel& robot, const Pose& bolt_pose, double head_across_flats,
                         double head_height, double force_threshold, double loop_hz,
                         double rate_limit) {
  json dh = json::array();
  for (const DhRow& r : robot.dh) {
    dh.push_back({{"a", r.a}, {"d", r.d}, {"alpha", r.alpha}, {"theta_offset", r.theta_offset}});
  }
  return json{{"type", "hello"},
              {"seq", 0},
              {"data",
               {{"dh", dh},
                {"tool_transform", pose_json(robot.tool_transform)},
                {"link_radii", robot.link_radii},
                {"bolt_pose", pose_json(bolt_pose)},
                {"head_across_flats", head_across_flats},
                {"head_height", head_height},
                {"force_threshold", force_threshold},
                {"loop_hz", loop_hz},
                {"rate_limit", rate_limit}}}}
      .dump();
}

std::string encode_command(const CommandEnvelope& env) {
  json j{{"seq", env.seq}, {"client_id", env.client_id}, {"time", env.time}};
  if (const auto* op = std::get_if<OperatorEvent>(&env.command)) {
    j["type"] = "operator_event";
    j["data"] = {{"event", to_string(*op)}};
  } else if (const auto* jog = std::get_if<DeviceJog>(&env.command)) {
    j["type"] = "device_jog";
    j["data"] = {{"translation", vec_json(jog->translation)},
                 {"rotation", vec_json(jog->rotation)},
                 {"clutch", jog->clutch}};
  } else {
    const auto& p = std::get<ParamUpdate>(env.command);
    j["type"] = "param_update";
    j["data"] = {{"name", p.name}, {"value", p.value}};
  }
  return j.dump();
}

std::string encode_error(std::string_view message, std::int64_t seq) {
  return json{{"type", "error"}, {"seq", seq}, {"data", {{"message", message}}}}.dump();
}

CommandEnvelope Ingestor::ingest(std::string_view raw, const std::string& client_id) {
  const json env = parse_or_throw(raw);
  const std::string type = string_field(env, "type");
  CommandEnvelope out;
  out.seq = seq_of(env);
  out.client_id = client_id;
  if (env.contains("time")) {
    if (!env["time"].is_number()) throw MalformedMessage("time must be a number");
    out.time = env["time"].get<double>();
  }
  const json& data = field(env, "data");
  if (!data.is_object()) throw MalformedMessage("data must be an object");
  if (type == "operator_event") {
    out.command = enum_field<OperatorEvent>(data, "event", operator_event_from_string);
  } else if (type == "device_jog") {
    DeviceJog jog;
    jog.translation = vec_from(field(data, "translation"), "translation");
    jog.rotation = data.contains("rotation") ? vec_from(data["rotation"], "rotation") : Vec3::Zero();
    jog.clutch = data.contains("clutch") ? bool_field(data, "clutch") : true;
    if (!jog.translation.allFinite() || !jog.rotation.allFinite())
      throw MalformedMessage("jog must be finite");
    out.command = jog;
  } else if (type == "param_update") {
    ParamUpdate p{string_field(data, "name"), number_field(data, "value")};
    if (!std::isfinite(p.value)) throw MalformedMessage("parameter value must be finite");
    out.command = p;
  } else {
    throw MalformedMessage("unknown message type " + type);
  }

  const auto it = last_seq_.find(client_id);
  if (it != last_seq_.end() && out.seq <= it->second) {
    throw StaleSequence("seq " + std::to_string(out.seq) + " not after " +
                        std::to_string(it->second));
  }
  last_seq_[client_id] = out.seq;
  return out;
}

void CommandQueue::push(CommandEnvelope env) {
  {
    std::lock_guard lock(m_);
    q_.push_back(std::move(env));
  }
  cv_.notify_one();
}

std::vector<CommandEnvelope> CommandQueue::drain() {
  std::lock_guard lock(m_);
  std::vector<CommandEnvelope> out(std::make_move_iterator(q_.begin()),
                                   std::make_move_iterator(q_.end()));
  q_.clear();
  return out;
}

std::size_t CommandQueue::size() const {
  std::lock_guard lock(m_);
  return q_.size();
}

bool CommandQueue::wait_for_item(double timeout_s) {
  std::unique_lock lock(m_);
  return cv_.wait_for(lock, std::chrono::duration<double>(timeout_s), [&] { return !q_.empty(); });
}

void TelemetryBuffer::publish(std::uint64_t seq, std::string encoded) {
  std::lock_guard lock(m_);
  seq_ = seq;
  data_ = std::move(encoded);
  has_ = true;
}

std::optional<std::pair<std::uint64_t, std::string>> TelemetryBuffer::latest_after(
    std::uint64_t after_seq) const {
  std::lock_guard lock(m_);
  if (!has_ || seq_ <= after_seq) return std::nullopt;
  return std::make_pair(seq_, data_);
}

RateLimiter::RateLimiter(double loop_hz, double limit_hz) {
  if (!(loop_hz > 0.0) || !(limit_hz > 0.0))
    throw std::invalid_argument("rates must be positive");
  stride_ = static_cast<std::uint64_t>(std::ceil(loop_hz / limit_hz));
}

}  // namespace bolting
