#include "corrsim/scene.hpp"

#include <algorithm>
#include <cmath>

#include "corrsim/error.hpp"

namespace corrsim {

namespace {

struct PosedBox {
  int part_id;
  SE3Pose pose;  // box frame -> world
  Vec3 half;
};

std::vector<PosedBox> posed_boxes(const ArticulatedObject& object) {
  std::vector<PosedBox> out;
  for (const auto& part : object.parts()) {
    const SE3Pose t = object.part_transform(part.id);
    for (const auto& box : part.geometry) {
      out.push_back({part.id, t * SE3Pose(box.center, box.orientation), box.half_extents});
    }
  }
  return out;
}

std::optional<double> slab_hit(const Vec3& o, const Vec3& d, const Vec3& half) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (o[i] < -half[i] || o[i] > half[i]) return std::nullopt;
      continue;
    }
    double t0 = (-half[i] - o[i]) / d[i];
    double t1 = (half[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return std::nullopt;
  }
  if (t_exit < 0.0) return std::nullopt;
  return t_enter >= 0.0 ? t_enter : 0.0;
}

std::optional<double> posed_hit(const Vec3& origin, const Vec3& dir, const PosedBox& box) {
  const Quat inv = box.pose.orientation().conjugate();
  const Vec3 o = inv * (origin - box.pose.position());
  const Vec3 d = inv * dir;
  return slab_hit(o, d, box.half);
}

}  // namespace

Camera Camera::normalized() const {
  if (width < 16 || height < 16) {
    throw Error(ErrorCode::kInvalidCamera, "width and height must be at least 16");
  }
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) {
    throw Error(ErrorCode::kInvalidCamera, "pixel_size must be positive");
  }
  const double vn = view_direction.norm();
  if (!(vn > 0.0)) throw Error(ErrorCode::kInvalidCamera, "zero view direction");
  Camera c = *this;
  c.view_direction = view_direction / vn;
  Vec3 u = up - up.dot(c.view_direction) * c.view_direction;
  if (u.norm() < 1e-9) throw Error(ErrorCode::kInvalidCamera, "up is parallel to view direction");
  c.up = u.normalized();
  return c;
}

Vec3 Camera::pixel_origin(double u, double v) const {
  return frame_center + (u - 0.5 * width) * pixel_size * right() -
         (v - 0.5 * height) * pixel_size * up;
}

Eigen::Vector2d project(const Camera& camera, const Vec3& world) {
  const Vec3 rel = world - camera.frame_center;
  const double x = rel.dot(camera.right()) / camera.pixel_size;
  const double y = rel.dot(camera.up) / camera.pixel_size;
  return {x + 0.5 * camera.width, 0.5 * camera.height - y};
}

std::optional<Pixel> project_pixel(const Camera& camera, const Vec3& world) {
  const Eigen::Vector2d uv = project(camera, world);
  const Pixel p{static_cast<int>(std::floor(uv.x())), static_cast<int>(std::floor(uv.y()))};
  if (p.u < 0 || p.v < 0 || p.u >= camera.width || p.v >= camera.height) return std::nullopt;
  return p;
}

BoolGrid Observation::foreground_mask() const {
  BoolGrid out(part_id.width(), part_id.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = part_id.data()[i] >= 0 ? 1 : 0;
  return out;
}

std::optional<double> ray_box_hit(const Vec3& origin, const Vec3& direction, const Box& box,
                                  const SE3Pose& transform) {
  const PosedBox pb{0, transform * SE3Pose(box.center, box.orientation), box.half_extents};
  return posed_hit(origin, direction, pb);
}

Observation render(const ArticulatedObject& object, const Camera& camera_in) {
  const Camera camera = camera_in.normalized();
  const auto boxes = posed_boxes(object);
  Observation obs;
  obs.camera = camera;
  obs.depth = Grid<double>(camera.width, camera.height, kBackgroundDepth);
  obs.part_id = Grid<int>(camera.width, camera.height, -1);
  obs.mask_layer = BoolGrid(camera.width, camera.height, 0);
  bool any_hit = false;
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Vec3 origin = camera.pixel_center({u, v});
      double best = kBackgroundDepth;
      int best_id = -1;
      for (const auto& box : boxes) {
        auto t = posed_hit(origin, camera.view_direction, box);
        if (t && *t < best) {
          best = *t;
          best_id = box.part_id;
        }
      }
      if (best_id >= 0) {
        obs.depth(u, v) = best;
        obs.part_id(u, v) = best_id;
        any_hit = true;
      }
    }
  }
  if (!any_hit) throw Error(ErrorCode::kEmptyScene, "no part is visible from the camera");
  return obs;
}

Vec3 lift_pixel(const Observation& observation, Pixel pixel) {
  if (!observation.depth.contains(pixel)) {
    throw Error(ErrorCode::kBackgroundPixel, "pixel outside the image");
  }
  const double d = observation.depth[pixel];
  if (!std::isfinite(d)) throw Error(ErrorCode::kBackgroundPixel, "pixel has no depth");
  return observation.camera.pixel_center(pixel) + d * observation.camera.view_direction;
}

Vec3 surface_normal(const ArticulatedObject& object, int part_id, const Vec3& world_point) {
  constexpr double kTol = 1e-6;
  const Part& part = object.part(part_id);
  const SE3Pose t = object.part_transform(part_id);
  double best_gap = std::numeric_limits<double>::infinity();
  Vec3 best_normal = Vec3::Zero();
  for (const auto& box : part.geometry) {
    const SE3Pose pose = t * SE3Pose(box.center, box.orientation);
    const Vec3 local = pose.inverse().transform_point(world_point);
    if ((local.cwiseAbs() - box.half_extents).maxCoeff() > kTol) continue;
    for (int i = 0; i < 3; ++i) {
      const double gap = std::abs(std::abs(local[i]) - box.half_extents[i]);
      if (gap <= kTol && gap < best_gap) {
        best_gap = gap;
        Vec3 n = Vec3::Zero();
        n[i] = local[i] >= 0.0 ? 1.0 : -1.0;
        best_normal = pose.transform_vector(n);
      }
    }
  }
  if (!std::isfinite(best_gap)) {
    throw Error(ErrorCode::kNotOnSurface, "point is not on a face of part " + std::to_string(part_id));
  }
  return best_normal.normalized();
}

BoolGrid interaction_map(const ArticulatedObject& object, const Observation& observation) {
  BoolGrid out(observation.part_id.width(), observation.part_id.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int id = observation.part_id.data()[i];
    out.data()[i] = (id >= 0 && object.part(id).movable) ? 1 : 0;
  }
  return out;
}

BoolGrid interaction_map(const ArticulatedObject& object, const Camera& camera) {
  const Camera c = camera.normalized();
  if (object.parts().empty()) return BoolGrid(c.width, c.height, 0);
  try {
    return interaction_map(object, render(object, c));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kEmptyScene) return BoolGrid(c.width, c.height, 0);
    throw;
  }
}

Observation overlay_mask(const Observation& observation, const BoolGrid& mask) {
  if (!observation.mask_layer.same_shape(mask)) {
    throw Error(ErrorCode::kDimensionMismatch, "mask shape differs from observation");
  }
  Observation out = observation;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data()[i] && observation.part_id.data()[i] >= 0) out.mask_layer.data()[i] = 1;
  }
  return out;
}

Camera default_camera(const ArticulatedObject& object, int resolution, double yaw, double pitch) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& part : object.parts()) {
    const SE3Pose t = object.part_transform(part.id);
    for (const auto& box : part.geometry) {
      const SE3Pose pose = t * SE3Pose(box.center, box.orientation);
      for (int c = 0; c < 8; ++c) {
        const Vec3 corner(c & 1 ? box.half_extents.x() : -box.half_extents.x(),
                          c & 2 ? box.half_extents.y() : -box.half_extents.y(),
                          c & 4 ? box.half_extents.z() : -box.half_extents.z());
        const Vec3 w = pose.transform_point(corner);
        lo = lo.cwiseMin(w);
        hi = hi.cwiseMax(w);
      }
    }
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double radius = 0.5 * (hi - lo).norm();
  Vec3 view = Vec3(-1.0, 0.4, -0.5).normalized();
  view = Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * view;
  const Vec3 side = view.cross(Vec3::UnitZ()).normalized();
  view = (Eigen::AngleAxisd(pitch, side) * view).normalized();
  Camera cam;
  cam.view_direction = view;
  cam.up = Vec3::UnitZ();
  cam.width = resolution;
  cam.height = resolution;
  cam.pixel_size = 2.0 * radius * 1.05 / resolution;
  cam.frame_center = center - view * (radius + 0.5);
  return cam.normalized();
}

}  // namespace corrsim
