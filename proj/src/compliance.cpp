#include "bolting/compliance.hpp"

#include <cmath>
#include <stdexcept>

namespace bolting {

void AdmittanceParams::validate() const {
  if ((virtual_mass.array() <= 0.0).any()) throw std::invalid_argument("admittance mass must be > 0");
  if ((virtual_damping.array() <= 0.0).any())
    throw std::invalid_argument("admittance damping must be > 0");
  if ((virtual_stiffness.array() < 0.0).any())
    throw std::invalid_argument("admittance stiffness must be >= 0");
  if (!(jump_threshold_position > 0.0) || !(jump_threshold_orientation > 0.0))
    throw std::invalid_argument("reference jump thresholds must be > 0");
}

AdmittanceState AdmittanceState::at_rest(const Pose& pose, double time) {
  AdmittanceState s;
  s.virtual_pose = pose;
  s.last_reference = pose;
  s.last_reference_time = time;
  return s;
}

bool reference_within_gate(const AdmittanceState& state, const AdmittanceParams& params,
                           const Pose& reference) {
  const Pose& anchor =
      params.gate_against == GateAgainst::Reference ? state.last_reference : state.virtual_pose;
  const PoseError e = pose_error(reference, anchor);
  return e.position.norm() <= params.jump_threshold_position &&
         e.orientation.norm() <= params.jump_threshold_orientation;
}

namespace {

// Applies the jump gate; returns whether the reference was taken.
bool accept_reference(AdmittanceState& s, const AdmittanceParams& params,
                      const std::optional<Pose>& reference, double time) {
  if (!reference) return false;
  if (!reference_within_gate(s, params, *reference)) {
    ++s.discarded_references;
    return false;
  }
  s.last_reference = *reference;
  s.last_reference_time = time;
  return true;
}

}  // namespace

AdmittanceOutput admittance_update(const AdmittanceState& state, const AdmittanceParams& params,
                                   const std::optional<Pose>& reference, const Wrench& measured,
                                   double dt, double time) {
  if (!(dt > 0.0 && dt <= 0.01)) throw std::invalid_argument("admittance dt must be in (0, 0.01]");
  AdmittanceOutput out;
  out.state = state;
  AdmittanceState& s = out.state;
  out.reference_accepted = accept_reference(s, params, reference, time);

  const Vec6 e = pose_error(s.virtual_pose, s.last_reference).stacked();
  const Vec6 f = measured.stacked();
  Vec6 v = s.virtual_twist.stacked();
  const Vec6 acc = (f - params.virtual_damping.cwiseProduct(v) -
                    params.virtual_stiffness.cwiseProduct(e))
                       .cwiseQuotient(params.virtual_mass);
  v += acc * dt;
  s.virtual_twist = Twist::from_stacked(v);

  const Vec3 p = s.virtual_pose.position() + s.virtual_twist.linear * dt;
  const Quat q = quat_from_rotation_vector(s.virtual_twist.angular * dt) *
                 s.virtual_pose.orientation();
  s.virtual_pose = Pose(p, q);
  out.commanded_pose = s.virtual_pose;
  return out;
}

AdmittanceOutput rigid_update(const AdmittanceState& state, const AdmittanceParams& params,
                              const std::optional<Pose>& reference, double dt, double time) {
  if (!(dt > 0.0 && dt <= 0.01)) throw std::invalid_argument("admittance dt must be in (0, 0.01]");
  AdmittanceOutput out;
  out.state = state;
  out.reference_accepted = accept_reference(out.state, params, reference, time);
  out.state.virtual_pose = out.state.last_reference;
  out.state.virtual_twist = Twist{};
  out.commanded_pose = out.state.virtual_pose;
  return out;
}

double admittance_energy(const AdmittanceState& state, const AdmittanceParams& params) {
  const Vec6 e = pose_error(state.virtual_pose, state.last_reference).stacked();
  const Vec6 v = state.virtual_twist.stacked();
  return 0.5 * v.dot(params.virtual_mass.cwiseProduct(v)) +
         0.5 * e.dot(params.virtual_stiffness.cwiseProduct(e));
}

Pose rgc_tick(const TimedTrajectory& traj, double elapsed) { return sample(traj, elapsed); }

SafetyMonitor safety_check(const SafetyMonitor& monitor, const Wrench& wrench) {
  SafetyMonitor m = monitor;
  m.tripped = m.tripped || wrench.force.norm() > m.force_threshold ||
              wrench.torque.norm() > m.torque_threshold;
  return m;
}

SafetyMonitor safety_reset(const SafetyMonitor& monitor, bool operator_ack) {
  SafetyMonitor m = monitor;
  if (operator_ack) m.tripped = false;
  return m;
}

}  // namespace bolting
