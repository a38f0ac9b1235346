#include "corrsim/interaction.hpp"

#include <cmath>

#include "corrsim/error.hpp"

namespace corrsim {

std::string to_string(Primitive p) { return p == Primitive::kPull ? "pull" : "push"; }

Primitive primitive_from_string(const std::string& s) {
  if (s == "pull") return Primitive::kPull;
  if (s == "push") return Primitive::kPush;
  throw Error(ErrorCode::kConfig, "unknown primitive '" + s + "'");
}

void PullParams::validate() const {
  if (frames < 3) throw Error(ErrorCode::kInvalidParams, "frames must be >= 3");
  if (!(total_distance > 0.0)) throw Error(ErrorCode::kInvalidParams, "total_distance must be > 0");
  if (grip_alignment_threshold < 0.0 || grip_alignment_threshold > 1.0) {
    throw Error(ErrorCode::kInvalidParams, "grip alignment threshold must be in [0, 1]");
  }
  if (movement_epsilon < 0.0) throw Error(ErrorCode::kInvalidParams, "negative movement epsilon");
}

std::vector<Vec3> Trajectory::positions() const {
  std::vector<Vec3> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(p.position());
  return out;
}

Quat gripper_orientation(const Vec3& gripper_direction) {
  return rotation_between(Vec3::UnitY(), gripper_direction);
}

Trajectory execute_pull_at(ArticulatedObject& object, int part_id, const Vec3& contact,
                           const Vec3& direction, double distance, const PullParams& params) {
  params.validate();
  if (std::abs(direction.norm() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidDirection, "gripper direction is not unit length");
  }
  const Part& part = object.part(part_id);
  Trajectory traj;
  traj.contacted_part = part_id;
  traj.q_before = object.q(part_id);
  const SE3Pose start(contact, gripper_orientation(direction));
  traj.poses.reserve(static_cast<std::size_t>(params.frames) + 1);
  traj.poses.push_back(start);

  if (!part.movable) {
    traj.poses.resize(static_cast<std::size_t>(params.frames) + 1, start);
    traj.q_after = traj.q_before;
    return traj;
  }

  // The EE is rigidly attached to the part: pose_i = T(q_i) T(q_0)^-1 pose_0.
  const SE3Pose attach = object.part_transform(part_id).inverse() * start;
  const double step = distance / params.frames;
  for (int f = 0; f < params.frames; ++f) {
    const Vec3 here = (object.part_transform(part_id) * attach).position();
    const Vec3 motion = joint_motion_direction(object, part_id, here);
    const double align = direction.dot(motion);
    if (std::abs(align) >= params.grip_alignment_threshold) {
      const double dq = step * align / contact_speed(object, part_id, here);
      apply_joint_delta(object, part_id, dq);
    }
    traj.poses.push_back(object.q(part_id) == traj.q_before
                             ? start
                             : object.part_transform(part_id) * attach);
  }
  traj.q_after = object.q(part_id);
  return traj;
}

Trajectory execute_pull(ArticulatedObject& object, const Observation& observation,
                        const Action& action, const PullParams& params) {
  if (std::abs(action.gripper_direction.norm() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidDirection, "gripper direction is not unit length");
  }
  const Vec3 contact = lift_pixel(observation, action.contact_pixel);
  const int part_id = observation.part_id[action.contact_pixel];
  return execute_pull_at(object, part_id, contact, action.commanded_motion(),
                         params.total_distance, params);
}

double total_displacement(const Trajectory& trajectory) {
  if (trajectory.poses.size() < 2) return 0.0;
  return (trajectory.poses.back().position() - trajectory.poses.front().position()).norm();
}

SuccessReport evaluate_success(double q_before, double q_after, const Joint* joint,
                               const Vec3& commanded_direction, const Trajectory& trajectory,
                               const SuccessParams& params) {
  SuccessReport r;
  if (joint == nullptr) return r;
  r.delta_q = q_after - q_before;
  r.range_fraction = std::abs(r.delta_q) / joint->range();
  for (std::size_t i = 1; i < trajectory.poses.size(); ++i) {
    const Vec3 d = trajectory.poses[i].position() - trajectory.poses[i - 1].position();
    const double n = d.norm();
    if (n > 0.0) {
      r.direction_dot = commanded_direction.dot(d / n);
      break;
    }
  }
  const bool moved_enough =
      std::abs(r.delta_q) > params.min_displacement || r.range_fraction > params.min_range_fraction;
  r.success = moved_enough && r.direction_dot > params.min_direction_dot;
  return r;
}

SuccessReport evaluate_success(const ArticulatedObject& object, const Action& action,
                               const Trajectory& trajectory, const SuccessParams& params) {
  const Joint* joint = nullptr;
  if (trajectory.contacted_part) {
    const Part& p = object.part(*trajectory.contacted_part);
    if (p.joint) joint = &*p.joint;
  }
  return evaluate_success(trajectory.q_before, trajectory.q_after, joint,
                          action.commanded_motion(), trajectory, params);
}

}  // namespace corrsim
