#include "corrsim/fie.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Eigenvalues>

#include "corrsim/error.hpp"

namespace corrsim {

namespace {

constexpr double kCrossTol = 1e-9;

std::vector<Vec3> moving_points(const std::vector<Vec3>& pts) {
  if (pts.size() < 2) throw Error(ErrorCode::kTooShort, "trajectory needs at least two poses");
  return pts;
}

}  // namespace

std::string to_string(EstimatedKind kind) {
  switch (kind) {
    case EstimatedKind::kPrismatic: return "prismatic";
    case EstimatedKind::kRevolute: return "revolute";
    case EstimatedKind::kNoMotion: return "no_motion";
  }
  return "no_motion";
}

BoolGrid FeedbackRecord::mask_union() const {
  if (masks.empty()) return {};
  BoolGrid out(masks.front().pixels.width(), masks.front().pixels.height(), 0);
  for (const auto& m : masks) {
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] |= m.pixels.data()[i];
  }
  return out;
}

double angle_between(const Vec3& a, const Vec3& b, bool unsigned_axis) {
  const double c = a.normalized().dot(b.normalized());
  const double s = a.normalized().cross(b.normalized()).norm();
  const double ang = std::atan2(s, c);
  return unsigned_axis ? std::min(ang, std::numbers::pi - ang) : ang;
}

std::vector<Vec3> displacement_vectors(const std::vector<Vec3>& points) {
  const auto pts = moving_points(points);
  std::vector<Vec3> out;
  out.reserve(pts.size() - 1);
  for (std::size_t i = 1; i < pts.size(); ++i) out.push_back(pts[i] - pts[i - 1]);
  return out;
}

std::vector<Vec3> displacement_vectors(const Trajectory& trajectory) {
  return displacement_vectors(trajectory.positions());
}

std::vector<double> adjacent_angles(const std::vector<Vec3>& points) {
  std::vector<Vec3> nonzero;
  for (const auto& v : displacement_vectors(points)) {
    if (v.norm() > 0.0) nonzero.push_back(v);
  }
  std::vector<double> out;
  for (std::size_t i = 1; i < nonzero.size(); ++i) {
    out.push_back(angle_between(nonzero[i - 1], nonzero[i]));
  }
  return out;
}

TurningFit fit_turning(const std::vector<Vec3>& points) {
  const std::size_t n = points.size();
  if (n < 3) return {};
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) cov += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 dir = eig.eigenvectors().col(2);
  const Vec3 e1 = eig.eigenvectors().col(1);
  const Vec3 e0 = eig.eigenvectors().col(0);

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 3);
  Eigen::MatrixXd perp(static_cast<Eigen::Index>(n), 2);
  double s_min = std::numeric_limits<double>::infinity();
  double s_max = -s_min;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 rel = points[i] - centroid;
    const double s = rel.dot(dir);
    s_min = std::min(s_min, s);
    s_max = std::max(s_max, s);
    const auto row = static_cast<Eigen::Index>(i);
    design(row, 0) = 1.0;
    design(row, 1) = s;
    design(row, 2) = s * s;
    perp(row, 0) = rel.dot(e1);
    perp(row, 1) = rel.dot(e0);
  }
  const double length = s_max - s_min;
  if (!(length > 0.0)) return {};
  const Eigen::Matrix3d gram = design.transpose() * design;
  Eigen::LDLT<Eigen::Matrix3d> ldlt(gram);
  if (ldlt.info() != Eigen::Success || std::abs(gram.determinant()) < 1e-300) return {};
  const Eigen::MatrixXd coef = ldlt.solve(design.transpose() * perp);
  const Eigen::MatrixXd resid = perp - design * coef;
  const double k = std::hypot(coef(2, 0), coef(2, 1));

  TurningFit out;
  out.turning = 2.0 * k * length;
  const double dof = 2.0 * static_cast<double>(n) - 6.0;
  if (dof > 0.0) {
    const double sigma2 = resid.squaredNorm() / dof;
    const double inv22 = ldlt.solve(Eigen::Vector3d::UnitZ())(2);
    out.standard_error = 2.0 * length * std::sqrt(std::max(0.0, sigma2 * inv22));
  }
  return out;
}

EstimatedKind classify_joint(const std::vector<Vec3>& points, const ClassifyParams& params) {
  const auto pts = moving_points(points);
  if ((pts.back() - pts.front()).norm() < params.movement_epsilon) return EstimatedKind::kNoMotion;
  if (params.mode == ClassifyMode::kAdjacentAngles || pts.size() < 4) {
    for (double a : adjacent_angles(pts)) {
      if (!(a < params.angle_threshold)) return EstimatedKind::kRevolute;
    }
    return EstimatedKind::kPrismatic;
  }
  const TurningFit fit = fit_turning(pts);
  const bool curved = fit.turning >= params.angle_threshold &&
                      fit.turning > params.significance * fit.standard_error;
  return curved ? EstimatedKind::kRevolute : EstimatedKind::kPrismatic;
}

EstimatedKind classify_joint(const Trajectory& trajectory, const ClassifyParams& params) {
  return classify_joint(trajectory.positions(), params);
}

Vec3 estimate_axis_single(const std::vector<Vec3>& points) {
  const auto pts = moving_points(points);
  const Vec3& ps = pts.front();
  const Vec3& pm = pts[(pts.size() - 1) / 2];
  const Vec3& pe = pts.back();
  const Vec3 axis = (pm - ps).cross(pe - pm);
  if (axis.norm() < kCrossTol) {
    throw Error(ErrorCode::kCollinearTrajectory, "start, middle and end points are collinear");
  }
  return axis.normalized();
}

Vec3 estimate_axis_single(const Trajectory& trajectory) {
  return estimate_axis_single(trajectory.positions());
}

Vec3 estimate_axis_multi(const std::vector<std::vector<Vec3>>& trajectories, EstimatedKind kind,
                         const AxisEstimateOptions& options) {
  std::vector<const std::vector<Vec3>*> moving;
  for (const auto& t : trajectories) {
    if (t.size() >= 2 && (t.back() - t.front()).norm() >= options.movement_epsilon) {
      moving.push_back(&t);
    }
  }
  if (moving.empty() || kind == EstimatedKind::kNoMotion) {
    throw Error(ErrorCode::kNoMovement, "no trajectory with movement");
  }

  if (kind == EstimatedKind::kPrismatic) {
    const Vec3 first = moving.front()->back() - moving.front()->front();
    Vec3 sum = Vec3::Zero();
    for (const auto* t : moving) {
      Vec3 d = t->back() - t->front();
      if (d.dot(first) < 0.0) d = -d;
      sum += d;
    }
    return sum.normalized();
  }

  std::vector<Vec3> chords;
  for (const auto* t : moving) {
    const Vec3& ps = t->front();
    const Vec3& pm = (*t)[(t->size() - 1) / 2];
    const Vec3& pe = t->back();
    if (options.include_half_chords) {
      chords.push_back(pm - ps);
      chords.push_back(pe - pm);
    }
    chords.push_back(pe - ps);
  }
  Vec3 sum = Vec3::Zero();
  std::optional<Vec3> reference;
  for (std::size_t i = 0; i < chords.size(); ++i) {
    for (std::size_t j = i + 1; j < chords.size(); ++j) {
      Vec3 c = chords[i].cross(chords[j]);
      if (c.norm() <= kCrossTol) continue;
      if (!reference) reference = c;
      if (c.dot(*reference) < 0.0) c = -c;
      sum += c;
    }
  }
  if (!reference || sum.norm() <= kCrossTol) {
    throw Error(ErrorCode::kDegenerateChords, "no independent chord pair");
  }
  Vec3 axis = sum.normalized();
  if (options.least_squares_refine) {
    Mat3 scatter = Mat3::Zero();
    for (const auto& c : chords) scatter += c * c.transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
    Vec3 ls = eig.eigenvectors().col(0);
    if (ls.dot(axis) < 0.0) ls = -ls;
    axis = ls.normalized();
  }
  return axis;
}

Vec3 estimate_axis_multi(const std::vector<const Trajectory*>& trajectories, EstimatedKind kind,
                         const AxisEstimateOptions& options) {
  std::vector<std::vector<Vec3>> pts;
  pts.reserve(trajectories.size());
  for (const auto* t : trajectories) pts.push_back(t->positions());
  return estimate_axis_multi(pts, kind, options);
}

bool movability_query(const ArticulatedObject& object, const Observation& observation, Pixel pixel) {
  if (!observation.foreground(pixel)) {
    throw Error(ErrorCode::kBackgroundPixel, "movability query on background");
  }
  return object.part(observation.part_id[pixel]).movable;
}

Mask segment_unmovable(const ArticulatedObject& object, const Observation& observation,
                       Pixel pixel) {
  if (movability_query(object, observation, pixel)) {
    throw Error(ErrorCode::kMovablePart, "segmentation requested on a movable part");
  }
  const int id = observation.part_id[pixel];
  Mask mask{BoolGrid(observation.part_id.width(), observation.part_id.height(), 0), pixel};
  std::deque<Pixel> frontier{pixel};
  mask.pixels[pixel] = 1;
  while (!frontier.empty()) {
    const Pixel p = frontier.front();
    frontier.pop_front();
    for (const Pixel n : {Pixel{p.u + 1, p.v}, Pixel{p.u - 1, p.v}, Pixel{p.u, p.v + 1},
                          Pixel{p.u, p.v - 1}}) {
      if (!mask.pixels.contains(n) || mask.pixels[n] || observation.part_id[n] != id) continue;
      mask.pixels[n] = 1;
      frontier.push_back(n);
    }
  }
  return mask;
}

FeedbackRecord accumulate(FeedbackRecord record, Mask mask) {
  record.masks.push_back(std::move(mask));
  return record;
}

}  // namespace corrsim
