#pragma once

// Feedback extraction from failed interactions: joint type and axis from
// end-effector trajectories, movability queries, and unmovable-part masks.

#include <numbers>
#include <optional>
#include <vector>

#include "corrsim/grid.hpp"
#include "corrsim/interaction.hpp"
#include "corrsim/kinematics.hpp"
#include "corrsim/scene.hpp"

namespace corrsim {

enum class EstimatedKind { kPrismatic, kRevolute, kNoMotion };

std::string to_string(EstimatedKind kind);

struct JointEstimate {
  EstimatedKind kind = EstimatedKind::kNoMotion;
  std::optional<Vec3> axis;  ///< present iff kind != kNoMotion
  int confidence = 0;        ///< trajectories used

  friend bool operator==(const JointEstimate&, const JointEstimate&) = default;
};

struct Mask {
  BoolGrid pixels;
  Pixel source_pixel;

  friend bool operator==(const Mask&, const Mask&) = default;
};

struct FeedbackRecord {
  JointEstimate joint_estimate;
  std::vector<Mask> masks;
  /// Moving trajectories behind the estimate: attempt i is referenced as i,
  /// the probe run after attempt i as -(i + 1).
  std::vector<int> trajectory_refs;

  /// Union of all accumulated masks; empty grid when there are none.
  BoolGrid mask_union() const;

  friend bool operator==(const FeedbackRecord&, const FeedbackRecord&) = default;
};

/// v_i = p_i - p_{i-1}. Throws TooShort below two poses.
std::vector<Vec3> displacement_vectors(const Trajectory& trajectory);
std::vector<Vec3> displacement_vectors(const std::vector<Vec3>& points);

/// Angles (radians) between consecutive nonzero displacement vectors.
std::vector<double> adjacent_angles(const std::vector<Vec3>& points);

enum class ClassifyMode {
  /// Prismatic iff every adjacent displacement angle is below the threshold.
  kAdjacentAngles,
  /// Prismatic iff the total turning of a least-squares quadratic fit to the
  /// path is below the threshold or not statistically distinguishable from
  /// the fit residual.
  kFittedTurning,
};

struct ClassifyParams {
  double angle_threshold = std::numbers::pi / 180.0;  ///< θ_c, 1°
  double movement_epsilon = 1e-4;
  ClassifyMode mode = ClassifyMode::kFittedTurning;
  /// Standard errors the fitted turning must exceed to count as curved.
  double significance = 4.0;
};

EstimatedKind classify_joint(const Trajectory& trajectory, const ClassifyParams& params = {});
EstimatedKind classify_joint(const std::vector<Vec3>& points, const ClassifyParams& params = {});

/// Total turning angle of a least-squares quadratic fit and its standard
/// error. Exposed for diagnostics.
struct TurningFit {
  double turning = 0.0;
  double standard_error = 0.0;
};
TurningFit fit_turning(const std::vector<Vec3>& points);

/// normalize((p_m - p_s) × (p_e - p_m)); throws CollinearTrajectory.
Vec3 estimate_axis_single(const Trajectory& trajectory);
Vec3 estimate_axis_single(const std::vector<Vec3>& points);

struct AxisEstimateOptions {
  bool include_half_chords = true;
  /// Replaces the averaged cross products by the least-variance direction of
  /// the stacked chords, sign-aligned to the pairwise estimate.
  bool least_squares_refine = false;
  double movement_epsilon = 1e-4;
};

/// Axis from several trajectories of the same joint. Throws NoMovement when
/// none moved and DegenerateChords when no chord pair is independent.
Vec3 estimate_axis_multi(const std::vector<std::vector<Vec3>>& trajectories, EstimatedKind kind,
                         const AxisEstimateOptions& options = {});
Vec3 estimate_axis_multi(const std::vector<const Trajectory*>& trajectories, EstimatedKind kind,
                         const AxisEstimateOptions& options = {});

/// Ground-truth movability at a pixel. Throws BackgroundPixel.
bool movability_query(const ArticulatedObject& object, const Observation& observation, Pixel pixel);

/// 4-connected region of pixels sharing the queried pixel's part id.
/// Throws MovablePart when the pixel is on a movable part.
Mask segment_unmovable(const ArticulatedObject& object, const Observation& observation,
                       Pixel pixel);

FeedbackRecord accumulate(FeedbackRecord record, Mask mask);

/// Angle in radians between two directions, sign-insensitive when `unsigned_axis`.
double angle_between(const Vec3& a, const Vec3& b, bool unsigned_axis = false);

}  // namespace corrsim
