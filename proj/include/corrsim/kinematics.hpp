#pragma once

// Rigid-body poses and the single-joint articulated object model.
//
// Quaternion convention: Hamilton product, scalar-last when serialized
// (x, y, z, w), matching Eigen's internal coefficient order. Every
// orientation written to disk or to the wire uses that order.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace corrsim {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;

class SE3Pose {
 public:
  SE3Pose() : position_(Vec3::Zero()), orientation_(Quat::Identity()) {}
  /// Normalizes `orientation`; throws InvalidParams on a zero quaternion.
  SE3Pose(const Vec3& position, const Quat& orientation);

  /// Stores `orientation` verbatim; for decoding records that were written
  /// from normalized poses.
  static SE3Pose from_raw(const Vec3& position, const Quat& orientation) {
    SE3Pose p;
    p.position_ = position;
    p.orientation_ = orientation;
    return p;
  }
  static SE3Pose identity() { return SE3Pose(); }
  static SE3Pose translation(const Vec3& t) { return SE3Pose(t, Quat::Identity()); }
  /// Rotation by `angle` about the line through `point` along unit `axis`.
  static SE3Pose rotation_about(const Vec3& point, const Vec3& axis, double angle);

  const Vec3& position() const { return position_; }
  const Quat& orientation() const { return orientation_; }
  Mat3 rotation() const { return orientation_.toRotationMatrix(); }

  /// this ∘ other: applies `other` first.
  SE3Pose operator*(const SE3Pose& other) const;
  SE3Pose inverse() const;
  Vec3 transform_point(const Vec3& p) const { return orientation_ * p + position_; }
  Vec3 transform_vector(const Vec3& v) const { return orientation_ * v; }

  friend bool operator==(const SE3Pose& a, const SE3Pose& b) {
    return a.position_ == b.position_ && a.orientation_.coeffs() == b.orientation_.coeffs();
  }

 private:
  Vec3 position_;
  Quat orientation_;
};

enum class JointKind { kPrismatic, kRevolute };

std::string to_string(JointKind kind);

struct Joint {
  JointKind kind = JointKind::kPrismatic;
  Vec3 origin = Vec3::Zero();  ///< world frame, at q = 0
  Vec3 axis = Vec3::UnitZ();   ///< unit
  double q_lo = 0.0;
  double q_hi = 1.0;

  double range() const { return q_hi - q_lo; }
  /// World transform of the child part at joint value q, relative to q = 0.
  SE3Pose transform(double q) const;
};

/// Oriented box expressed in the part's zero-configuration (world) frame.
struct Box {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);
  Quat orientation = Quat::Identity();
};

bool operator==(const Joint& a, const Joint& b);
bool operator==(const Box& a, const Box& b);

struct Part {
  int id = 0;
  bool movable = false;
  std::optional<Joint> joint;  ///< present iff movable
  std::vector<Box> geometry;
  std::string name;
};

bool operator==(const Part& a, const Part& b);

class ArticulatedObject {
 public:
  ArticulatedObject() = default;
  /// Validates every invariant; throws InvalidObject. Movable parts start at
  /// q_lo unless `config` provides a value.
  explicit ArticulatedObject(std::vector<Part> parts, std::map<int, double> config = {},
                             std::string name = {});

  const std::string& name() const { return name_; }
  const std::vector<Part>& parts() const { return parts_; }
  const std::map<int, double>& config() const { return config_; }

  bool has_part(int part_id) const;
  const Part& part(int part_id) const;  ///< throws UnknownPart
  /// Current joint value; 0 for static parts.
  double q(int part_id) const;
  /// Sets q without clamping; throws InvalidParams when outside the range.
  void set_q(int part_id, double q);

  /// Current world transform of the part relative to its zero configuration.
  SE3Pose part_transform(int part_id) const;

  friend bool operator==(const ArticulatedObject& a, const ArticulatedObject& b);

 private:
  std::string name_;
  std::vector<Part> parts_;
  std::map<int, double> config_;
};

/// Unit direction a point on a movable part travels under increasing q.
Vec3 joint_motion_direction(const ArticulatedObject& object, int part_id, const Vec3& contact);

/// Contact-point speed per unit q: |axis × r| for revolute, 1 for prismatic.
double contact_speed(const ArticulatedObject& object, int part_id, const Vec3& contact);

/// Adds `delta` to the part's q, clamped to range. Returns the applied delta.
double apply_joint_delta(ArticulatedObject& object, int part_id, double delta);

/// Maps a zero-configuration point of the part into the world at current q.
Vec3 part_point_world(const ArticulatedObject& object, int part_id, const Vec3& local_point);

/// Inverse of part_point_world.
Vec3 part_point_local(const ArticulatedObject& object, int part_id, const Vec3& world_point);

/// Distance from `p` to the line through `origin` along unit `axis`.
double distance_to_line(const Vec3& p, const Vec3& origin, const Vec3& axis);

/// Returns the unit vector rotation taking `from` onto `to`.
Quat rotation_between(const Vec3& from, const Vec3& to);

}  // namespace corrsim
