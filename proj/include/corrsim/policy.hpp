#pragma once

// The policy abstraction and its built-in implementations.
//
// Policies talk in text: the orchestrator sends a PolicyRequest carrying the
// prompt plus the structured fields behind it, and parses the reply with the
// answer grammar in prompts.hpp. Local policies read the structured fields;
// bridge-connected models only see the prompt and exported images.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "corrsim/fie.hpp"
#include "corrsim/grid.hpp"
#include "corrsim/interaction.hpp"
#include "corrsim/scene.hpp"

namespace corrsim {

// ---------------------------------------------------------------------------
// Direction discretization: 100 bins of width 0.02 per component.

inline constexpr int kDirectionBins = 100;
inline constexpr double kBinWidth = 0.02;

struct DirectionBins {
  std::array<int, 3> bins{50, 50, 50};
  friend bool operator==(const DirectionBins&, const DirectionBins&) = default;
};

/// bin = clamp(floor((x + 1) / 0.02), 0, 99) per component, no unit check.
DirectionBins encode_components(const Vec3& v);
/// Throws NotUnit when |v| is off by more than 1e-6.
DirectionBins encode_direction(const Vec3& v);
/// Bin centers -1 + 0.02 b + 0.01, not renormalized. Throws InvalidParams on
/// out-of-range bins.
Vec3 decode_direction_centers(const DirectionBins& bins);
/// Renormalized bin centers. Throws DegenerateZero on a zero center vector.
Vec3 decode_direction(const DirectionBins& bins);

// ---------------------------------------------------------------------------

struct Instruction {
  std::string text = "Open the articulated part.";
  Primitive primitive = Primitive::kPull;
};

struct TtaSchedule {
  double lr0 = 5e-8;
  double weight_decay = 2e-3;
  double decay_factor = 0.3;
  int decay_every = 300;

  double lr(std::int64_t iteration) const;
};

enum class ExperienceKind { kMaskPresenceVqa, kMaskPositionVqa, kCorrectedPoseSupervision };

std::string to_string(ExperienceKind kind);

struct ExperienceItem {
  ExperienceKind kind = ExperienceKind::kMaskPresenceVqa;
  std::string observation_ref;
  /// Presence: the mask layer shown (empty grid for the clean image).
  /// Position: the mask the labels refer to.
  BoolGrid mask;
  bool presence_answer = false;
  std::vector<std::pair<Pixel, bool>> labeled_pixels;
  std::optional<Action> target;  ///< corrected pose supervision
  std::string target_answer;

  friend bool operator==(const ExperienceItem&, const ExperienceItem&) = default;
};

enum class TaskKind { kPredict, kPositionCot, kRotationCorrect };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

struct RotationFields {
  EstimatedKind kind = EstimatedKind::kNoMotion;
  Vec3 axis = Vec3::UnitZ();
  Pixel contact;
  Vec3 normal = Vec3::UnitX();
  Vec3 previous_direction = Vec3::UnitX();

  friend bool operator==(const RotationFields&, const RotationFields&) = default;
};

struct PolicyRequest {
  std::string session_id;
  TaskKind task = TaskKind::kPredict;
  int step = 0;  ///< 1..5 for position CoT
  std::string prompt;
  const Observation* observation = nullptr;
  Instruction instruction;
  std::optional<Action> previous_action;
  std::optional<Action> proposed_action;
  std::optional<RotationFields> rotation;
  int attempt_index = 0;
  bool reask = false;
};

/// Ground truth handed to a policy before each sample. Only reference
/// policies read `object`; it is never serialized to a bridge peer.
struct SampleContext {
  std::string sample_id;
  const ArticulatedObject* object = nullptr;
  Camera camera;
  Instruction instruction;
  std::uint64_t seed = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual void begin_sample(const SampleContext& context) { (void)context; }
  /// Free-text reply following the answer grammar for `request.task`.
  virtual std::string respond(const PolicyRequest& request) = 0;

  virtual bool adaptive() const { return false; }
  virtual void adapt(std::span<const ExperienceItem> items, double lr, double weight_decay) {
    (void)items;
    (void)lr;
    (void)weight_decay;
  }
};

/// Ground-truth action: centroid-most visible pixel of the largest visible
/// movable part, direction along the joint motion there (toward the side
/// with more remaining range), sign per primitive. Pixels set in `exclude`
/// are skipped. Throws NoMovableVisible.
Action oracle_action(const ArticulatedObject& object, const Observation& observation,
                     Primitive primitive, const BoolGrid* exclude = nullptr);

/// Direction a rotation correction should take given the extracted joint
/// information: the axis for prismatic joints, the surface normal projected
/// off the axis for revolute joints.
Vec3 axis_implied_direction(const RotationFields& fields);

/// Rotates `direction` by `angle` about a uniformly random perpendicular.
Vec3 perturb_direction(const Vec3& direction, double angle, std::mt19937_64& rng);

class OraclePolicy : public Policy {
 public:
  std::string name() const override { return "oracle"; }
  void begin_sample(const SampleContext& context) override;
  std::string respond(const PolicyRequest& request) override;

 protected:
  const ArticulatedObject& object() const;
  std::string answer_cot_question(const PolicyRequest& request) const;

  std::optional<ArticulatedObject> object_;
  Instruction instruction_;
};

struct PerturbationNoise {
  double p_static = 0.0;
  double sigma_dir = 0.0;  ///< radians
};

class PerturbedPolicy : public OraclePolicy {
 public:
  explicit PerturbedPolicy(PerturbationNoise noise);

  std::string name() const override { return "perturbed"; }
  void begin_sample(const SampleContext& context) override;
  std::string respond(const PolicyRequest& request) override;

  const PerturbationNoise& noise() const { return noise_; }

 private:
  Action noisy_action(const Observation& observation, const BoolGrid* exclude);

  PerturbationNoise noise_;
  std::mt19937_64 rng_;
};

/// Per-pixel contact logits plus a categorical head per direction component.
class LearnablePolicy : public Policy {
 public:
  explicit LearnablePolicy(std::uint64_t seed, double init_scale = 0.01);

  std::string name() const override { return "learnable"; }
  void begin_sample(const SampleContext& context) override;
  std::string respond(const PolicyRequest& request) override;
  bool adaptive() const override { return true; }
  void adapt(std::span<const ExperienceItem> items, double lr, double weight_decay) override;

  const Grid<double>& pixel_logits() const { return pixel_logits_; }
  const std::array<std::array<double, kDirectionBins>, 3>& direction_logits() const {
    return direction_logits_;
  }
  /// Argmax over foreground pixels not set in `exclude`.
  Pixel best_pixel(const Observation& observation, const BoolGrid* exclude) const;
  DirectionBins best_bins() const;

 private:
  void ensure_shape(int width, int height);

  std::uint64_t seed_;
  double init_scale_;
  Grid<double> pixel_logits_;
  std::array<std::array<double, kDirectionBins>, 3> direction_logits_{};
  Instruction instruction_;
};

/// The built-in learnable policy adapts with this scaled schedule; the
/// default-constructed TtaSchedule keeps the large-model rate.
TtaSchedule learnable_default_schedule();

}  // namespace corrsim
