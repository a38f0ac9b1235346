#pragma once

// Suction pull/push execution and the success metric.

#include <optional>
#include <vector>

#include "corrsim/grid.hpp"
#include "corrsim/kinematics.hpp"
#include "corrsim/scene.hpp"

namespace corrsim {

enum class Primitive { kPull, kPush };

std::string to_string(Primitive p);
Primitive primitive_from_string(const std::string& s);

struct Action {
  Pixel contact_pixel;
  Vec3 gripper_direction = Vec3::UnitX();  ///< unit
  Primitive primitive = Primitive::kPull;

  /// Direction the end effector travels: +d for pull, -d for push.
  Vec3 commanded_motion() const {
    return primitive == Primitive::kPull ? gripper_direction : Vec3(-gripper_direction);
  }

  friend bool operator==(const Action& a, const Action& b) {
    return a.contact_pixel == b.contact_pixel && a.gripper_direction == b.gripper_direction &&
           a.primitive == b.primitive;
  }
};

struct PullParams {
  double total_distance = 0.1;
  int frames = 20;
  double grip_alignment_threshold = 0.3;  ///< μ
  double movement_epsilon = 1e-4;

  void validate() const;  ///< throws InvalidParams
};

struct Trajectory {
  std::vector<SE3Pose> poses;       ///< frames + 1, start included
  std::optional<int> contacted_part;
  double q_before = 0.0;
  double q_after = 0.0;

  std::vector<Vec3> positions() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct SuccessParams {
  double min_displacement = 0.01;      ///< meters (prismatic) / radians (revolute)
  double min_range_fraction = 0.5;
  double min_direction_dot = 0.3;
};

struct SuccessReport {
  bool success = false;
  double delta_q = 0.0;
  double range_fraction = 0.0;
  double direction_dot = 0.0;

  friend bool operator==(const SuccessReport&, const SuccessReport&) = default;
};

/// The end-effector frame's pulling axis (local +y) is aligned with the
/// gripper direction.
Quat gripper_orientation(const Vec3& gripper_direction);

/// Runs the quasi-static suction surrogate on `object` (mutated in place).
/// Throws BackgroundPixel and InvalidDirection.
Trajectory execute_pull(ArticulatedObject& object, const Observation& observation,
                        const Action& action, const PullParams& params);

/// Same motion model, starting from an explicit world contact on `part_id`
/// and pulling along `direction` over `distance`.
Trajectory execute_pull_at(ArticulatedObject& object, int part_id, const Vec3& contact,
                           const Vec3& direction, double distance, const PullParams& params);

/// Applies the success rule. `commanded_direction` is the direction the
/// gripper was asked to move (Action::commanded_motion()). `joint` is null
/// for static parts.
SuccessReport evaluate_success(double q_before, double q_after, const Joint* joint,
                               const Vec3& commanded_direction, const Trajectory& trajectory,
                               const SuccessParams& params = {});

/// Convenience wrapper resolving the joint from the trajectory's part.
SuccessReport evaluate_success(const ArticulatedObject& object, const Action& action,
                               const Trajectory& trajectory, const SuccessParams& params = {});

/// |p_last - p_first| of the end-effector trajectory.
double total_displacement(const Trajectory& trajectory);

}  // namespace corrsim
