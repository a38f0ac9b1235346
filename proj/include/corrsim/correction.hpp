#pragma once

// The interactive correction loop: diagnose a failed attempt, probe along the
// surface normal when nothing moved, and drive position or rotation
// corrections through a policy.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "corrsim/fie.hpp"
#include "corrsim/interaction.hpp"
#include "corrsim/policy.hpp"
#include "corrsim/prompts.hpp"

namespace corrsim {

enum class Diagnosis { kMoved, kNoMotion };
enum class FailureCause { kMoved, kNoMotionProbeMoved, kNoMotionContactInvalid };
enum class CorrectionKind { kNone, kPosition, kRotation };

std::string to_string(FailureCause cause);
std::string to_string(CorrectionKind kind);
FailureCause failure_cause_from_string(const std::string& s);
CorrectionKind correction_kind_from_string(const std::string& s);

struct TranscriptEntry {
  TaskKind task = TaskKind::kPredict;
  int step = 0;
  std::string prompt;
  std::string response;
  bool reask = false;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct AttemptRecord {
  int index = 0;
  Action action;
  Trajectory trajectory;
  SuccessReport report;
  std::optional<FailureCause> cause;  ///< present iff the attempt failed
  CorrectionKind correction_kind = CorrectionKind::kNone;
  /// Exchanges that produced this attempt's action.
  std::vector<TranscriptEntry> prompts;
  /// Normal-direction probe run after this attempt did not move anything.
  std::optional<Trajectory> probe;

  friend bool operator==(const AttemptRecord&, const AttemptRecord&) = default;
};

struct SessionLog {
  std::string sample_id;
  std::uint64_t seed = 0;
  std::string object_asset;  ///< object at its initial configuration
  Camera camera;
  Instruction instruction;
  std::vector<AttemptRecord> attempts;
  FeedbackRecord feedback;
  bool final_success = false;
  int corrections_used = 0;
  /// Set when the policy failed to produce a usable answer after a re-ask.
  std::optional<std::string> error;
  /// Why the loop stopped before success: "budget", "position_disabled",
  /// "rotation_disabled", "no_correction", "policy_failure", or empty.
  std::string stop_reason;
  /// Transcript of a prediction that never produced an executable action.
  std::vector<TranscriptEntry> unexecuted_prompts;

  friend bool operator==(const SessionLog& a, const SessionLog& b) {
    return a.sample_id == b.sample_id && a.seed == b.seed && a.object_asset == b.object_asset &&
           a.camera == b.camera && a.instruction.text == b.instruction.text &&
           a.instruction.primitive == b.instruction.primitive && a.attempts == b.attempts &&
           a.feedback == b.feedback && a.final_success == b.final_success &&
           a.corrections_used == b.corrections_used && a.error == b.error &&
           a.stop_reason == b.stop_reason && a.unexecuted_prompts == b.unexecuted_prompts;
  }
};

struct SessionParams {
  int max_corrections = 4;
  bool position_correction = true;
  bool rotation_correction = true;
  double probe_distance_scale = 0.25;
  PullParams pull;
  SuccessParams success;
  ClassifyParams classify;
  AxisEstimateOptions axis;
  const PromptTemplates* templates = nullptr;  ///< null: built-in v1

  void validate() const;
};

/// Moved iff total end-effector displacement >= epsilon.
Diagnosis diagnose(const Trajectory& trajectory, double movement_epsilon);

/// Pull along the outward surface normal at the contact pixel with a reduced
/// distance. `object` is mutated as in execute_pull.
Trajectory probe_normal(ArticulatedObject& object, const Observation& observation,
                        Pixel contact_pixel, const PullParams& params,
                        double distance_scale = 0.25);

/// Runs one test sample. The object is copied and reset to the given
/// configuration before every attempt. Malformed policy output is re-asked
/// once and then recorded in SessionLog::error; other errors propagate.
SessionLog run_session(const ArticulatedObject& object, const Camera& camera, Policy& policy,
                       const Instruction& instruction, const SessionParams& params,
                       const std::string& sample_id, std::uint64_t seed);

/// Experience extracted from one session for test-time adaptation.
struct TtaOptions {
  int position_pixels = 20;
  bool balanced_positions = false;
};

std::vector<ExperienceItem> extract_experience(const SessionLog& log, const TtaOptions& options = {});

/// Adapts `policy` on the experience of `log` alone with lr(k), then advances
/// k by the number of items. Non-adaptive policies are left untouched.
/// Returns the number of items consumed.
std::size_t tta_step(Policy& policy, const SessionLog& log, const TtaSchedule& schedule,
                     std::int64_t& iteration, const TtaOptions& options = {});

}  // namespace corrsim
