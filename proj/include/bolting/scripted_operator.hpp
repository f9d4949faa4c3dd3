#pragma once

// Scripted stand-in for the human operator: timeline rules that press
// buttons, inject faults and start jog behaviors that drive the input
// device the way a person watching the camera would.

#include "bolting/gateway.hpp"
#include "bolting/scenario_spec.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace bolting {

/// What the operator can see at the start of a tick.
struct Observation {
  double time = 0.0;
  double dt = 0.002;
  const PlantState* plant = nullptr;
  const SupervisorState* supervisor = nullptr;
  Pose bolt_pose;   // physical bolt, as seen through the camera
  Pose reference;   // pose the follower currently holds
  Pose device;      // input device pose
  bool teleop_enabled = false;
  bool teleop_engaged = false;
  TeleopMapping mapping;
  double target_torque = 8.0;
};

struct OperatorOutput {
  std::vector<OperatorEvent> events;
  std::vector<DeviceJog> jogs;
  std::vector<FaultPatch> injections;
  std::vector<std::string> notes;  // behavior milestones, for the event log
};

bool condition_holds(const Condition& c, const Observation& obs,
                     const std::set<std::string>& finished_behaviors);

/// A device-driving behavior. Implementations keep an intended follower
/// reference and emit the device motion that maps onto it.
class Behavior {
 public:
  virtual ~Behavior() = default;
  virtual const std::string& name() const = 0;
  virtual void tick(const Observation& obs, OperatorOutput& out) = 0;
  virtual bool done() const = 0;
};

std::unique_ptr<Behavior> make_behavior(const BehaviorSpec& spec);

/// Device jog that moves the follower reference by `dp` (base frame) and
/// rotates it by rotation vector `drot` (base frame).
DeviceJog jog_for_reference_delta(const Vec3& dp, const Vec3& drot, const TeleopMapping& mapping,
                                  bool clutch = true);

class ScriptedOperator {
 public:
  explicit ScriptedOperator(std::vector<TimelineRule> rules);

  OperatorOutput tick(const Observation& obs);
  const std::set<std::string>& finished_behaviors() const { return finished_; }
  const Behavior* active_behavior() const { return behavior_.get(); }

 private:
  struct RuleState {
    bool prev = false;
    bool armed = false;
    double since = 0.0;
    int fired = 0;
    Step fired_step = Step::Approach;
  };
  std::vector<TimelineRule> rules_;
  std::vector<RuleState> states_;
  std::unique_ptr<Behavior> behavior_;
  std::set<std::string> finished_;
};

}  // namespace bolting
