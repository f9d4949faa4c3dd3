#include "bolting/scripted_operator.hpp"

#include <algorithm>
#include <cmath>

namespace bolting {

bool condition_holds(const Condition& c, const Observation& obs,
                     const std::set<std::string>& finished) {
  const SupervisorState& sv = *obs.supervisor;
  const PlantState& pl = *obs.plant;
  if (c.step && sv.step != *c.step) return false;
  if (c.phase && sv.phase != *c.phase) return false;
  if (c.mode && sv.mode != *c.mode) return false;
  if (c.validatable && is_legal(sv, OperatorEvent::Validate) != *c.validatable) return false;
  if (c.time_ge && obs.time < *c.time_ge) return false;
  if (c.lateral_error_gt && !(lateral_error(pl.socket_pose, obs.bolt_pose) > *c.lateral_error_gt))
    return false;
  if (c.engagement_ge && !(pl.engagement_depth >= *c.engagement_ge)) return false;
  if (c.engagement_le && !(pl.engagement_depth <= *c.engagement_le)) return false;
  if (c.speed_lt && !(pl.socket_twist.linear.norm() < *c.speed_lt)) return false;
  if (c.bolt_torque_ge && !(pl.bolt_torque >= *c.bolt_torque_ge)) return false;
  if (c.behavior_done && !finished.count(*c.behavior_done)) return false;
  return true;
}

DeviceJog jog_for_reference_delta(const Vec3& dp, const Vec3& drot, const TeleopMapping& mapping,
                                  bool clutch) {
  const Quat inv = mapping.camera_alignment.conjugate();
  return DeviceJog{inv * dp / mapping.motion_scale, inv * drot, clutch};
}

namespace {

Vec3 step_toward(const Vec3& from, const Vec3& to, double max_step) {
  const Vec3 d = to - from;
  const double n = d.norm();
  if (n <= max_step) return to;
  return from + d * (max_step / n);
}

/// Shared engagement sequence: align the stylus with the socket while the
/// clutch is open, let the device filter settle, close the clutch, then
/// drive an intended reference open loop through the inverse mapping.
class DeviceBehavior : public Behavior {
 public:
  explicit DeviceBehavior(BehaviorSpec spec) : spec_(std::move(spec)) {}

  const std::string& name() const override { return spec_.id(); }
  bool done() const override { return stage_ == Stage::Done; }

  void tick(const Observation& obs, OperatorOutput& out) final {
    if (!obs.teleop_enabled) {
      if (stage_ != Stage::Done) stage_ = Stage::Align;
      return;
    }
    switch (stage_) {
      case Stage::Align: {
        const Quat want = obs.mapping.camera_alignment.conjugate() * obs.plant->socket_pose.orientation();
        const Vec3 rot = rotation_vector(want * obs.device.orientation().conjugate());
        out.jogs.push_back(DeviceJog{Vec3::Zero(), rot, false});
        settle_ = obs.mapping.filter_window + 2;
        stage_ = Stage::Settle;
        break;
      }
      case Stage::Settle:
        out.jogs.push_back(DeviceJog{Vec3::Zero(), Vec3::Zero(), false});
        if (--settle_ <= 0) stage_ = Stage::Engage;
        break;
      case Stage::Engage:
        if (obs.teleop_engaged) {
          intended_ = obs.reference;
          started(intended_);
          stage_ = Stage::Run;
          out.notes.push_back(name() + ": engaged");
          run(obs, out);
        } else {
          out.jogs.push_back(DeviceJog{Vec3::Zero(), Vec3::Zero(), true});
        }
        break;
      case Stage::Run:
        run(obs, out);
        break;
      case Stage::Done:
        break;
    }
  }

 protected:
  /// Returns the next intended reference; call finish() when complete.
  virtual Pose advance(const Observation& obs, const Pose& intended, OperatorOutput& out) = 0;
  /// Called once with the reference held when the clutch engages.
  virtual void started(const Pose&) {}
  void finish() { stage_ = Stage::Done; }

  BehaviorSpec spec_;

 private:
  enum class Stage { Align, Settle, Engage, Run, Done };

  void run(const Observation& obs, OperatorOutput& out) {
    const Pose next = advance(obs, intended_, out);
    const Vec3 dp = next.position() - intended_.position();
    const Vec3 dr = rotation_vector(next.orientation() * intended_.orientation().conjugate());
    out.jogs.push_back(jog_for_reference_delta(dp, dr, obs.mapping));
    intended_ = next;
  }

  Stage stage_ = Stage::Align;
  int settle_ = 0;
  Pose intended_;
};

/// Holds still until the socket has settled for `hold` seconds.
class Settler {
 public:
  bool settled(const Observation& obs, bool extra_ok, double hold = 0.2) {
    const bool still = obs.plant->socket_twist.linear.norm() < 1e-3 && extra_ok;
    if (!still) {
      since_ = -1.0;
      return false;
    }
    if (since_ < 0.0) since_ = obs.time;
    return obs.time - since_ >= hold - 1e-12;
  }

 private:
  double since_ = -1.0;
};

/// Camera-guided coupling: center over the bolt axis seen in the image,
/// then descend onto the head.
class ManualCoupling : public DeviceBehavior {
 public:
  using DeviceBehavior::DeviceBehavior;

 protected:
  Pose advance(const Observation& obs, const Pose& r, OperatorOutput& out) override {
    const Pose& b = obs.bolt_pose;
    const Vec3 local = b.inverse().transform_point(r.position());
    const double max_step = spec_.speed * obs.dt;
    switch (stage_) {
      case Stage::Center: {
        const Vec3 goal = b.transform_point(Vec3(0, 0, local.z()));
        const Vec3 p = step_toward(r.position(), goal, max_step);
        if (p == goal) {
          stage_ = Stage::Descend;
          out.notes.push_back(name() + ": centered over bolt");
        }
        return Pose(p, r.orientation());
      }
      case Stage::Descend: {
        const Vec3 goal = b.transform_point(Vec3::Zero());
        const Vec3 p = step_toward(r.position(), goal, max_step);
        if (p == goal) stage_ = Stage::Hold;
        return Pose(p, r.orientation());
      }
      case Stage::Hold:
        if (hold_.settled(obs, obs.plant->engagement_depth >= 0.002)) {
          out.notes.push_back(name() + ": seated");
          finish();
        }
        return r;
    }
    return r;
  }

 private:
  enum class Stage { Center, Descend, Hold } stage_ = Stage::Center;
  Settler hold_;
};

/// Strokes of at most cycle_angle about the bolt axis. Between strokes the
/// socket is lifted off, wound back and re-seated, since the wrist cannot
/// turn indefinitely. The turn rate follows the torque deficit so the last
/// stroke creeps up on the target.
class ManualTightening : public DeviceBehavior {
 public:
  using DeviceBehavior::DeviceBehavior;

  static constexpr double kRateGain = 0.1;   // rad/s per N*m of deficit
  static constexpr double kMinRate = 0.005;  // rad/s

 protected:
  Pose advance(const Observation& obs, const Pose& r, OperatorOutput& out) override {
    const Pose& b = obs.bolt_pose;
    const Vec3 axis = b.axis_z();
    const double dt = obs.dt;
    switch (stage_) {
      case Stage::Turn: {
        const double deficit = obs.target_torque - obs.plant->bolt_torque;
        if (deficit <= 0.0) {
          stage_ = Stage::Hold;
          out.notes.push_back(name() + ": target torque reached");
          return r;
        }
        const double rate = std::clamp(kRateGain * deficit, kMinRate, spec_.angular_speed);
        const double dth = std::min(rate * dt, spec_.cycle_angle - stroke_);
        stroke_ += dth;
        if (stroke_ >= spec_.cycle_angle - 1e-12) {
          stage_ = Stage::Lift;
          lift_from_ = r.position();
          out.notes.push_back(name() + ": stroke done, lifting");
        }
        return Pose(r.position(), quat_from_rotation_vector(axis * dth) * r.orientation());
      }
      case Stage::Lift: {
        const Vec3 goal = lift_from_ + axis * spec_.lift;
        const Vec3 p = step_toward(r.position(), goal, spec_.lift_speed * dt);
        if (p == goal) stage_ = Stage::Unwind;
        return Pose(p, r.orientation());
      }
      case Stage::Unwind: {
        const double dth = std::min(spec_.angular_speed * dt, stroke_);
        stroke_ -= dth;
        if (stroke_ <= 0.0) {
          stroke_ = 0.0;
          stage_ = Stage::Lower;
        }
        return Pose(r.position(), quat_from_rotation_vector(-axis * dth) * r.orientation());
      }
      case Stage::Lower: {
        const Vec3 p = step_toward(r.position(), lift_from_, spec_.lift_speed * dt);
        if (p == lift_from_) stage_ = Stage::Reseat;
        return Pose(p, r.orientation());
      }
      case Stage::Reseat:
        if (hold_.settled(obs, obs.plant->engagement_depth >= 0.002, 0.05)) {
          stage_ = Stage::Turn;
          out.notes.push_back(name() + ": re-seated");
        }
        return r;
      case Stage::Hold:
        if (hold_.settled(obs, true)) {
          out.notes.push_back(name() + ": done");
          finish();
        }
        return r;
    }
    return r;
  }

 private:
  enum class Stage { Turn, Lift, Unwind, Lower, Reseat, Hold } stage_ = Stage::Turn;
  double stroke_ = 0.0;
  Vec3 lift_from_ = Vec3::Zero();
  Settler hold_;
};

/// Straight jog to a base-frame pose.
class JogTo : public DeviceBehavior {
 public:
  using DeviceBehavior::DeviceBehavior;

 protected:
  void started(const Pose& from) override {
    const Pose& t = *spec_.target;
    goal_ = spec_.relative ? Pose(from.position() + t.position(), t.orientation() * from.orientation())
                           : t;
  }

  Pose advance(const Observation& obs, const Pose& r, OperatorOutput& out) override {
    const Pose& goal = goal_;
    const Vec3 p = step_toward(r.position(), goal.position(), spec_.speed * obs.dt);
    const double ang = angular_distance(r.orientation(), goal.orientation());
    const double max_ang = spec_.angular_speed * obs.dt;
    const Quat q = ang <= max_ang ? goal.orientation()
                                  : r.orientation().slerp(max_ang / ang, goal.orientation());
    if (p == goal.position() && ang <= max_ang && !arrived_) {
      arrived_ = true;
      out.notes.push_back(name() + ": arrived");
    }
    if (arrived_ && hold_.settled(obs, true)) finish();
    return Pose(p, q);
  }

 private:
  bool arrived_ = false;
  Pose goal_;
  Settler hold_;
};

}  // namespace

std::unique_ptr<Behavior> make_behavior(const BehaviorSpec& spec) {
  if (spec.name == "manual_coupling") return std::make_unique<ManualCoupling>(spec);
  if (spec.name == "manual_tightening") return std::make_unique<ManualTightening>(spec);
  if (spec.name == "jog_to") {
    if (!spec.target) throw std::invalid_argument("jog_to needs a target");
    return std::make_unique<JogTo>(spec);
  }
  throw std::invalid_argument("unknown behavior " + spec.name);
}

ScriptedOperator::ScriptedOperator(std::vector<TimelineRule> rules)
    : rules_(std::move(rules)), states_(rules_.size()) {}

OperatorOutput ScriptedOperator::tick(const Observation& obs) {
  OperatorOutput out;
  const Step step = obs.supervisor->step;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const TimelineRule& rule = rules_[i];
    RuleState& st = states_[i];
    const bool cond = condition_holds(rule.when, obs, finished_);
    if (cond && (!st.prev || (!st.armed && st.fired > 0 && step != st.fired_step))) {
      // rising edge, or the pipeline moved on while the condition stayed true
      st.armed = true;
      st.since = obs.time;
    }
    if (!cond) st.armed = false;
    st.prev = cond;
    if (!st.armed || obs.time - st.since < rule.dwell - 1e-9) continue;
    if (rule.once && st.fired > 0) continue;
    st.armed = false;
    ++st.fired;
    st.fired_step = step;
    switch (rule.action.kind) {
      case ScriptAction::Kind::Event:
        out.events.push_back(rule.action.event);
        break;
      case ScriptAction::Kind::Inject:
        out.injections.push_back(rule.action.inject);
        break;
      case ScriptAction::Kind::Behavior:
        behavior_ = make_behavior(rule.action.behavior);
        out.notes.push_back(rule.action.behavior.id() + ": started");
        break;
    }
  }
  if (behavior_ && !behavior_->done()) {
    behavior_->tick(obs, out);
    if (behavior_->done()) finished_.insert(behavior_->name());
  }
  return out;
}

}  // namespace bolting
