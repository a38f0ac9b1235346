#include "corrsim/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "corrsim/error.hpp"

namespace corrsim {

namespace {

constexpr double kUnitTol = 1e-9;

bool near_unit(const Vec3& v) { return std::abs(v.norm() - 1.0) <= kUnitTol; }

}  // namespace

SE3Pose::SE3Pose(const Vec3& position, const Quat& orientation) : position_(position) {
  const double n = orientation.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidParams, "orientation quaternion has zero norm");
  }
  orientation_ = Quat(orientation.coeffs() / n);
}

SE3Pose SE3Pose::rotation_about(const Vec3& point, const Vec3& axis, double angle) {
  const Quat r(Eigen::AngleAxisd(angle, axis));
  return SE3Pose(point - (r * point), r);
}

SE3Pose SE3Pose::operator*(const SE3Pose& other) const {
  return SE3Pose(orientation_ * other.position_ + position_, orientation_ * other.orientation_);
}

SE3Pose SE3Pose::inverse() const {
  const Quat inv = orientation_.conjugate();
  return SE3Pose(-(inv * position_), inv);
}

std::string to_string(JointKind kind) {
  return kind == JointKind::kPrismatic ? "prismatic" : "revolute";
}

SE3Pose Joint::transform(double q) const {
  if (kind == JointKind::kPrismatic) return SE3Pose::translation(axis * q);
  return SE3Pose::rotation_about(origin, axis, q);
}

bool operator==(const Joint& a, const Joint& b) {
  return a.kind == b.kind && a.origin == b.origin && a.axis == b.axis && a.q_lo == b.q_lo &&
         a.q_hi == b.q_hi;
}

bool operator==(const Box& a, const Box& b) {
  return a.center == b.center && a.half_extents == b.half_extents &&
         a.orientation.coeffs() == b.orientation.coeffs();
}

bool operator==(const Part& a, const Part& b) {
  return a.id == b.id && a.movable == b.movable && a.joint == b.joint &&
         a.geometry == b.geometry && a.name == b.name;
}

bool operator==(const ArticulatedObject& a, const ArticulatedObject& b) {
  return a.name_ == b.name_ && a.parts_ == b.parts_ && a.config_ == b.config_;
}

ArticulatedObject::ArticulatedObject(std::vector<Part> parts, std::map<int, double> config,
                                     std::string name)
    : name_(std::move(name)), parts_(std::move(parts)) {
  std::set<int> ids;
  for (auto& part : parts_) {
    const std::string where = "part " + std::to_string(part.id);
    if (!ids.insert(part.id).second) {
      throw Error(ErrorCode::kInvalidObject, "duplicate part id " + std::to_string(part.id));
    }
    if (part.geometry.empty()) {
      throw Error(ErrorCode::kInvalidObject, where + " has no geometry");
    }
    for (auto& box : part.geometry) {
      if ((box.half_extents.array() <= 0.0).any() || !box.half_extents.allFinite()) {
        throw Error(ErrorCode::kInvalidObject, where + " has a non-positive half extent");
      }
      const double qn = box.orientation.norm();
      if (!(qn > 0.0)) throw Error(ErrorCode::kInvalidObject, where + " has a zero quaternion");
      if (std::abs(qn - 1.0) > 1e-12) box.orientation = Quat(box.orientation.coeffs() / qn);
    }
    if (part.movable != part.joint.has_value()) {
      throw Error(ErrorCode::kInvalidObject,
                  where + (part.movable ? " is movable without a joint" : " is static with a joint"));
    }
    if (part.joint) {
      const Joint& j = *part.joint;
      if (!near_unit(j.axis)) {
        throw Error(ErrorCode::kInvalidObject, where + " joint axis is not unit length");
      }
      if (!(j.q_lo < j.q_hi)) {
        throw Error(ErrorCode::kInvalidObject, where + " joint range is empty");
      }
    }
  }
  for (const auto& [id, q] : config) {
    if (!ids.contains(id)) {
      throw Error(ErrorCode::kInvalidObject, "config entry for unknown part " + std::to_string(id));
    }
  }
  for (const auto& part : parts_) {
    if (!part.movable) continue;
    auto it = config.find(part.id);
    const double q = it == config.end() ? part.joint->q_lo : it->second;
    if (q < part.joint->q_lo || q > part.joint->q_hi) {
      throw Error(ErrorCode::kInvalidObject,
                  "part " + std::to_string(part.id) + " config outside joint range");
    }
    config_[part.id] = q;
  }
}

bool ArticulatedObject::has_part(int part_id) const {
  return std::any_of(parts_.begin(), parts_.end(), [&](const Part& p) { return p.id == part_id; });
}

const Part& ArticulatedObject::part(int part_id) const {
  for (const auto& p : parts_) {
    if (p.id == part_id) return p;
  }
  throw Error(ErrorCode::kUnknownPart, "no part with id " + std::to_string(part_id));
}

double ArticulatedObject::q(int part_id) const {
  const Part& p = part(part_id);
  return p.movable ? config_.at(part_id) : 0.0;
}

void ArticulatedObject::set_q(int part_id, double q) {
  const Part& p = part(part_id);
  if (!p.movable) throw Error(ErrorCode::kNotMovable, "part " + std::to_string(part_id));
  if (q < p.joint->q_lo || q > p.joint->q_hi) {
    throw Error(ErrorCode::kInvalidParams, "q outside joint range");
  }
  config_[part_id] = q;
}

SE3Pose ArticulatedObject::part_transform(int part_id) const {
  const Part& p = part(part_id);
  if (!p.movable) return SE3Pose::identity();
  return p.joint->transform(config_.at(part_id));
}

Vec3 joint_motion_direction(const ArticulatedObject& object, int part_id, const Vec3& contact) {
  const Part& p = object.part(part_id);
  if (!p.movable) throw Error(ErrorCode::kNotMovable, "part " + std::to_string(part_id));
  const Joint& j = *p.joint;
  if (j.kind == JointKind::kPrismatic) return j.axis;
  // Parts hang off the static base, so the hinge line does not move with q.
  const Vec3 tangent = j.axis.cross(contact - j.origin);
  if (tangent.norm() < 1e-9) {
    throw Error(ErrorCode::kDegenerateRadius, "contact lies on the hinge line");
  }
  return tangent.normalized();
}

double contact_speed(const ArticulatedObject& object, int part_id, const Vec3& contact) {
  const Part& p = object.part(part_id);
  if (!p.movable) throw Error(ErrorCode::kNotMovable, "part " + std::to_string(part_id));
  const Joint& j = *p.joint;
  if (j.kind == JointKind::kPrismatic) return 1.0;
  return j.axis.cross(contact - j.origin).norm();
}

double apply_joint_delta(ArticulatedObject& object, int part_id, double delta) {
  const Part& p = object.part(part_id);
  if (!p.movable) throw Error(ErrorCode::kNotMovable, "part " + std::to_string(part_id));
  const double before = object.q(part_id);
  const double after = std::clamp(before + delta, p.joint->q_lo, p.joint->q_hi);
  object.set_q(part_id, after);
  return after - before;
}

Vec3 part_point_world(const ArticulatedObject& object, int part_id, const Vec3& local_point) {
  return object.part_transform(part_id).transform_point(local_point);
}

Vec3 part_point_local(const ArticulatedObject& object, int part_id, const Vec3& world_point) {
  return object.part_transform(part_id).inverse().transform_point(world_point);
}

double distance_to_line(const Vec3& p, const Vec3& origin, const Vec3& axis) {
  return axis.cross(p - origin).norm();
}

Quat rotation_between(const Vec3& from, const Vec3& to) {
  return Quat::FromTwoVectors(from, to).normalized();
}

}  // namespace corrsim
