#pragma once

// Benchmark harness: correction sessions over an object suite, ablation
// arms, reports and tables.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corrsim/correction.hpp"
#include "corrsim/policy.hpp"
#include "corrsim/serialize.hpp"

namespace corrsim {

struct PolicySpec {
  std::string kind = "oracle";  ///< oracle | perturbed | learnable | bridge
  double p_static = 0.0;
  double sigma_dir = 0.0;
  double init_scale = 0.01;  ///< learnable
  std::string endpoint;      ///< bridge
  std::string export_dir;    ///< bridge; empty disables file attachments
  bool inline_attachments = false;
  int image_size = 336;
  bool share_ground_truth = false;
};

struct BenchConfig {
  /// builtin: suite_count objects cycling through all families;
  /// family: suite_count variants of `family`; assets: files in asset_paths.
  std::string suite = "builtin";
  int suite_count = 20;
  std::uint64_t suite_seed = 0;
  std::string family;
  std::vector<std::string> asset_paths;

  PolicySpec policy;
  int corrections = 4;
  bool position_correction = true;
  bool rotation_correction = true;
  bool tta = false;
  std::optional<TtaSchedule> schedule;  ///< default depends on the policy
  std::vector<std::uint64_t> seeds{0};
  int episodes_per_object = 1;
  int resolution = 96;
  double camera_jitter = 0.15;
  /// Worker threads when TTA is off and the policy is local; 0 = hardware
  /// concurrency. Not part of the report.
  int threads = 0;
  Instruction instruction;
  PullParams pull;
  SuccessParams success;
  ClassifyParams classify;
  std::string templates_path;

  void validate() const;
  Json to_json() const;
  /// Missing keys keep their defaults. Throws Config.
  static BenchConfig from_json(const Json& j);
  static BenchConfig load(const std::filesystem::path& path);
};

std::vector<ArticulatedObject> load_suite(const BenchConfig& config,
                                          const std::filesystem::path& base_dir = {});

struct EpisodeResult {
  std::size_t object_index = 0;
  std::size_t seed_index = 0;
  int episode = 0;
  std::string sample_id;
  std::uint64_t seed = 0;
  bool quarantined = false;
  std::string error;
  std::optional<SessionLog> log;
};

struct RateRow {
  std::string name;
  std::size_t sessions = 0;
  std::size_t successes = 0;
  double rate() const {
    return sessions == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(sessions);
  }
};

struct BenchReport {
  Json config;
  int max_corrections = 0;
  std::vector<RateRow> per_object;
  RateRow aggregate;
  /// curve[c] = fraction of completed sessions that succeeded using <= c
  /// corrections.
  std::vector<double> curve;
  std::vector<RateRow> per_seed;
  std::vector<std::vector<double>> per_seed_curve;
  std::size_t quarantined = 0;
  std::size_t policy_failures = 0;
  std::vector<EpisodeResult> episodes;
  double runtime_seconds = 0.0;  ///< not part of the serialized report
};

/// Runs every (seed, object, episode) session in a fixed order. With TTA on
/// a fresh policy is created per seed and adapted after every session.
/// Episodes that raise are quarantined.
BenchReport run_bench(const BenchConfig& config, const std::vector<ArticulatedObject>& suite);

/// Deterministic report document (no timing).
Json report_to_json(const BenchReport& report);

/// Writes report.json, sessions.jsonl, quarantine.jsonl, timing.json and
/// the tables into `directory`.
void write_bench_outputs(const BenchReport& report, const std::filesystem::path& directory);

/// table.csv, table.txt and curve.csv. Returns the written paths.
std::vector<std::filesystem::path> emit_tables(const BenchReport& report,
                                               const std::filesystem::path& directory);
std::string table_csv(const BenchReport& report);
std::string table_text(const BenchReport& report);
std::string curve_csv(const BenchReport& report);

/// full, wo_pos, wo_rot, none (and wo_tta when TTA is on): the same config
/// with toggles changed.
std::vector<std::pair<std::string, BenchConfig>> ablation_arms(const BenchConfig& config);

/// Creates the policy a config describes for one seed.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, std::uint64_t seed);

/// Re-executes every attempt of a logged session and compares the
/// trajectories and reports bit for bit. Returns mismatch descriptions.
std::vector<std::string> replay_session(const SessionLog& log, const PullParams& pull = {},
                                        const SuccessParams& success = {},
                                        double probe_distance_scale = 0.25);

}  // namespace corrsim
