#pragma once

// Haptic bilateral controller: filtered device motion mapped onto follower
// pose references with clutch indexing, and impedance feedback from the
// admittance motion error.

#include "bolting/compliance.hpp"
#include "bolting/geometry.hpp"

#include <deque>
#include <optional>
#include <span>
#include <stdexcept>

namespace bolting {

struct InputDeviceSample {
  Pose pose;            // device base frame
  bool clutch = false;  // held = operator wants to drive the follower
  double time = 0.0;
};

struct TeleopMapping {
  Quat camera_alignment = Quat::Identity();  // device frame -> camera frame
  double motion_scale = 1.0;
  int filter_window = 10;
  double engage_angle_tolerance = 0.15;  // rad

  void validate() const;
};

struct FeedbackParams {
  Vec6 feedback_stiffness = (Vec6() << 200, 200, 200, 2, 2, 2).finished();
  Vec6 feedback_damping = (Vec6() << 5, 5, 5, 0.05, 0.05, 0.05).finished();
  double force_cap = 4.0;  // N

  void validate() const;
};

class NotEngaged : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Moving average over the last `window` samples. Orientation is the
/// normalized sign-aligned quaternion mean.
Pose filter_device(std::span<const InputDeviceSample> samples, int window);

/// Device orientation as seen through the camera alignment.
Quat mapped_orientation(const Quat& device, const TeleopMapping& mapping);

/// Inclusive orientation gate between stylus and socket.
bool try_engage(const Pose& device_pose, const Pose& socket_pose, const TeleopMapping& mapping);

/// Follower reference for a device pose relative to the engagement anchors.
Pose map_motion(const Pose& filtered_device, const Pose& anchor_device, const Pose& anchor_socket,
                const TeleopMapping& mapping);

/// Clutch/indexing state of one teleoperation session.
struct TeleopState {
  std::deque<InputDeviceSample> window;
  bool engaged = false;
  Pose anchor_device;
  Pose anchor_socket;
  std::optional<Pose> last_reference;
};

/// Throws NotEngaged when the session holds no anchors.
Pose map_motion(const TeleopState& state, const Pose& filtered_device, const TeleopMapping& mapping);

struct TeleopTick {
  TeleopState state;
  std::optional<Pose> reference;  // absent while the clutch is open
};

/// Consumes one device sample. `held_reference` is the pose the follower
/// currently holds; engagement anchors on it so re-engaging never jumps.
TeleopTick teleop_tick(const TeleopState& state, const InputDeviceSample& sample,
                       const Pose& socket_pose, const Pose& held_reference,
                       const TeleopMapping& mapping);

/// Spring-damper on the admittance motion error, expressed in the device
/// frame and norm-capped at force_cap.
Wrench feedback_force(const AdmittanceState& admittance, const FeedbackParams& params,
                      const Quat& camera_alignment = Quat::Identity());

}  // namespace bolting
