#pragma once

// Orthographic depth / part-id rendering of an articulated object.
//
// Image convention: pixel (u, v) has its center at
//   frame_center + ((u + 0.5) - W/2) * pixel_size * right
//                - ((v + 0.5) - H/2) * pixel_size * up
// with right = view × up. Rays start on that plane and travel along `view`;
// depth is the ray parameter of the nearest hit, so lift = plane point +
// depth * view.

#include <limits>
#include <optional>

#include "corrsim/grid.hpp"
#include "corrsim/kinematics.hpp"

namespace corrsim {

struct Camera {
  Vec3 view_direction = -Vec3::UnitZ();
  Vec3 up = Vec3::UnitY();
  Vec3 frame_center = Vec3::Zero();
  int width = 64;
  int height = 64;
  double pixel_size = 1.0 / 64.0;

  /// Validates and orthonormalizes `up` against `view_direction`; throws
  /// InvalidCamera.
  Camera normalized() const;
  Vec3 right() const { return view_direction.cross(up); }

  Vec3 pixel_origin(double u, double v) const;
  Vec3 pixel_center(Pixel p) const { return pixel_origin(p.u + 0.5, p.v + 0.5); }

  friend bool operator==(const Camera&, const Camera&) = default;
};

/// Continuous image coordinates of a world point (pixel centers at +0.5).
Eigen::Vector2d project(const Camera& camera, const Vec3& world);
/// Integer pixel containing a world point, if inside the frame.
std::optional<Pixel> project_pixel(const Camera& camera, const Vec3& world);

inline constexpr double kBackgroundDepth = std::numeric_limits<double>::infinity();

struct Observation {
  Grid<double> depth;      ///< +inf on background
  Grid<int> part_id;       ///< -1 on background
  BoolGrid mask_layer;     ///< accumulated red mask, subset of foreground
  Camera camera;

  bool foreground(Pixel p) const { return part_id.contains(p) && part_id[p] >= 0; }
  BoolGrid foreground_mask() const;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Ray-casts every part box at the current configuration. Nearest hit wins;
/// exact depth ties go to the earlier part. Throws EmptyScene when nothing is
/// hit.
Observation render(const ArticulatedObject& object, const Camera& camera);

/// World point on the surface seen through the pixel center.
Vec3 lift_pixel(const Observation& observation, Pixel pixel);

/// Outward unit normal of the part face containing `world_point`, at the
/// current configuration. Throws NotOnSurface beyond 1e-6.
Vec3 surface_normal(const ArticulatedObject& object, int part_id, const Vec3& world_point);

/// True where the visible part is movable.
BoolGrid interaction_map(const ArticulatedObject& object, const Camera& camera);
/// Same, computed from an existing render of `object`.
BoolGrid interaction_map(const ArticulatedObject& object, const Observation& observation);

/// mask_layer ∪ (mask ∩ foreground). Throws DimensionMismatch.
Observation overlay_mask(const Observation& observation, const BoolGrid& mask);

/// Nearest positive intersection parameter of a ray with an oriented box
/// posed by `transform`, if any. Exposed for tests and the renderer.
std::optional<double> ray_box_hit(const Vec3& origin, const Vec3& direction, const Box& box,
                                  const SE3Pose& transform);

/// Camera framing the whole object from a front-right-top oblique view.
/// `yaw` and `pitch` (radians) tilt the default view direction.
Camera default_camera(const ArticulatedObject& object, int resolution, double yaw = 0.0,
                      double pitch = 0.0);

}  // namespace corrsim
