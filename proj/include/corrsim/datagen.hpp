#pragma once

// Training-corpus generation: rejection-sampled successful episodes, their
// augmentation into four question/answer record kinds, and axis noise.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "corrsim/interaction.hpp"
#include "corrsim/policy.hpp"
#include "corrsim/prompts.hpp"
#include "corrsim/serialize.hpp"

namespace corrsim {

struct EpisodeSample {
  int object_index = 0;
  std::string object_name;
  Camera camera;
  Action action;  ///< direction already quantized to bin centers
  SuccessReport report;
  std::uint64_t seed = 0;  ///< per-episode seed used for augmentation

  friend bool operator==(const EpisodeSample&, const EpisodeSample&) = default;
};

struct DatagenConfig {
  int episodes = 1000;
  std::uint64_t seed = 0;
  int resolution = 64;
  double camera_jitter = 0.15;  ///< radians of yaw/pitch jitter
  double push_probability = 0.5;
  std::int64_t max_trials = 1'000'000;
  int position_pixels = 20;
  bool balanced_positions = false;
  double axis_noise_degrees = 20.0;
  PullParams pull;
  SuccessParams success;

  Json to_json() const;
  static DatagenConfig from_json(const Json& j);
};

struct SamplingResult {
  std::vector<EpisodeSample> samples;
  std::int64_t trials = 0;
  double acceptance_rate() const {
    return trials == 0 ? 0.0 : static_cast<double>(samples.size()) / static_cast<double>(trials);
  }
};

/// Throws ExhaustedBudget when `max_trials` runs out first and InvalidParams
/// on an empty object set.
SamplingResult sample_successful_episodes(const std::vector<ArticulatedObject>& objects,
                                          const DatagenConfig& config);

enum class VqaKind { kMaskClassification, kMaskPositionReasoning, kCorrectBasedOnMask, kRotationCorrection };

std::string to_string(VqaKind kind);

struct VqaRecord {
  VqaKind kind = VqaKind::kMaskClassification;
  int sample_index = 0;
  std::string observation_ref;
  std::string prompt;
  std::string answer;
  /// Data behind the answer, kept for validation.
  BoolGrid mask;
  std::vector<Pixel> query_pixels;
};

struct AugmentedSample {
  Observation clean;
  Observation masked;  ///< mask_layer empty when no static part is visible
  std::vector<VqaRecord> records;
};

/// Rotates `axis` by `angle` about the perpendicular at azimuth `phi`.
Vec3 rotate_about_perpendicular(const Vec3& axis, double angle, double phi);
/// θ ~ U(-max, max) about a uniformly random perpendicular.
Vec3 inject_axis_noise(const Vec3& axis, std::mt19937_64& rng, double max_degrees = 20.0);

AugmentedSample augment_sample(const ArticulatedObject& object, const EpisodeSample& sample,
                               int sample_index, const DatagenConfig& config,
                               const PromptTemplates& templates = default_templates());

struct CorpusSummary {
  std::size_t episodes = 0;
  std::size_t records = 0;
  std::int64_t trials = 0;
  std::uint64_t config_hash = 0;
};

/// Writes corpus.jsonl, episodes.jsonl, objects/, observations/ and
/// manifest.json under `directory`.
CorpusSummary generate_corpus(const std::vector<ArticulatedObject>& objects,
                              const DatagenConfig& config, const std::filesystem::path& directory);

}  // namespace corrsim
