#include "corrsim/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <thread>

#include "corrsim/asset.hpp"
#include "corrsim/bridge.hpp"
#include "corrsim/error.hpp"
#include "corrsim/objects.hpp"
#include "corrsim/rng.hpp"

namespace corrsim {

namespace {

std::string fixed4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void BenchConfig::validate() const {
  if (seeds.empty()) throw Error(ErrorCode::kConfig, "seeds must be non-empty");
  if (corrections < 0) throw Error(ErrorCode::kConfig, "corrections must be >= 0");
  if (episodes_per_object < 1) throw Error(ErrorCode::kConfig, "episodes_per_object must be >= 1");
  if (resolution < 16) throw Error(ErrorCode::kConfig, "resolution must be >= 16");
  if (suite != "builtin" && suite != "family" && suite != "assets") {
    throw Error(ErrorCode::kConfig, "suite must be builtin, family or assets");
  }
  if (suite == "assets" && asset_paths.empty()) throw Error(ErrorCode::kConfig, "no asset paths");
  const auto& k = policy.kind;
  if (k != "oracle" && k != "perturbed" && k != "learnable" && k != "bridge") {
    throw Error(ErrorCode::kConfig, "unknown policy kind '" + k + "'");
  }
  if (k == "bridge" && policy.endpoint.empty()) throw Error(ErrorCode::kConfig, "bridge needs an endpoint");
  pull.validate();
}

Json BenchConfig::to_json() const {
  Json p = {{"kind", policy.kind}};
  if (policy.kind == "perturbed") {
    p["p_static"] = policy.p_static;
    p["sigma_dir"] = policy.sigma_dir;
  } else if (policy.kind == "learnable") {
    p["init_scale"] = policy.init_scale;
  } else if (policy.kind == "bridge") {
    p["endpoint"] = policy.endpoint;
    p["export_dir"] = policy.export_dir;
    p["inline_attachments"] = policy.inline_attachments;
    p["image_size"] = policy.image_size;
    p["share_ground_truth"] = policy.share_ground_truth;
  }
  Json j = {{"suite", suite},
            {"suite_count", suite_count},
            {"suite_seed", suite_seed},
            {"family", family},
            {"asset_paths", asset_paths},
            {"policy", p},
            {"corrections", corrections},
            {"toggles",
             {{"position_correction", position_correction},
              {"rotation_correction", rotation_correction},
              {"tta", tta}}},
            {"seeds", seeds},
            {"episodes_per_object", episodes_per_object},
            {"resolution", resolution},
            {"camera_jitter", camera_jitter},
            {"instruction",
             {{"text", instruction.text}, {"primitive", to_string(instruction.primitive)}}},
            {"pull",
             {{"total_distance", pull.total_distance},
              {"frames", pull.frames},
              {"grip_alignment_threshold", pull.grip_alignment_threshold},
              {"movement_epsilon", pull.movement_epsilon}}},
            {"success",
             {{"min_displacement", success.min_displacement},
              {"min_range_fraction", success.min_range_fraction},
              {"min_direction_dot", success.min_direction_dot}}},
            {"classify",
             {{"angle_threshold", classify.angle_threshold},
              {"mode", classify.mode == ClassifyMode::kFittedTurning ? "fitted_turning" : "adjacent_angles"},
              {"significance", classify.significance}}},
            {"templates_path", templates_path}};
  if (schedule) {
    j["schedule"] = {{"lr0", schedule->lr0},
                     {"weight_decay", schedule->weight_decay},
                     {"decay_factor", schedule->decay_factor},
                     {"decay_every", schedule->decay_every}};
  }
  return j;
}

BenchConfig BenchConfig::from_json(const Json& j) {
  BenchConfig c;
  try {
    read_opt(j, "suite", c.suite);
    read_opt(j, "suite_count", c.suite_count);
    read_opt(j, "suite_seed", c.suite_seed);
    read_opt(j, "family", c.family);
    read_opt(j, "asset_paths", c.asset_paths);
    if (j.contains("policy")) {
      const Json& p = j.at("policy");
      read_opt(p, "kind", c.policy.kind);
      read_opt(p, "p_static", c.policy.p_static);
      read_opt(p, "sigma_dir", c.policy.sigma_dir);
      read_opt(p, "init_scale", c.policy.init_scale);
      read_opt(p, "endpoint", c.policy.endpoint);
      read_opt(p, "export_dir", c.policy.export_dir);
      read_opt(p, "inline_attachments", c.policy.inline_attachments);
      read_opt(p, "image_size", c.policy.image_size);
      read_opt(p, "share_ground_truth", c.policy.share_ground_truth);
    }
    read_opt(j, "corrections", c.corrections);
    if (j.contains("toggles")) {
      const Json& t = j.at("toggles");
      read_opt(t, "position_correction", c.position_correction);
      read_opt(t, "rotation_correction", c.rotation_correction);
      read_opt(t, "tta", c.tta);
    }
    read_opt(j, "seeds", c.seeds);
    read_opt(j, "episodes_per_object", c.episodes_per_object);
    read_opt(j, "resolution", c.resolution);
    read_opt(j, "camera_jitter", c.camera_jitter);
    read_opt(j, "threads", c.threads);
    if (j.contains("instruction")) {
      read_opt(j.at("instruction"), "text", c.instruction.text);
      if (j.at("instruction").contains("primitive")) {
        c.instruction.primitive = primitive_from_string(j.at("instruction").at("primitive").get<std::string>());
      }
    }
    if (j.contains("pull")) {
      const Json& p = j.at("pull");
      read_opt(p, "total_distance", c.pull.total_distance);
      read_opt(p, "frames", c.pull.frames);
      read_opt(p, "grip_alignment_threshold", c.pull.grip_alignment_threshold);
      read_opt(p, "movement_epsilon", c.pull.movement_epsilon);
    }
    if (j.contains("success")) {
      const Json& s = j.at("success");
      read_opt(s, "min_displacement", c.success.min_displacement);
      read_opt(s, "min_range_fraction", c.success.min_range_fraction);
      read_opt(s, "min_direction_dot", c.success.min_direction_dot);
    }
    if (j.contains("classify")) {
      const Json& s = j.at("classify");
      read_opt(s, "angle_threshold", c.classify.angle_threshold);
      read_opt(s, "significance", c.classify.significance);
      if (s.contains("mode")) {
        const auto mode = s.at("mode").get<std::string>();
        if (mode == "fitted_turning") {
          c.classify.mode = ClassifyMode::kFittedTurning;
        } else if (mode == "adjacent_angles") {
          c.classify.mode = ClassifyMode::kAdjacentAngles;
        } else {
          throw Error(ErrorCode::kConfig, "unknown classify mode '" + mode + "'");
        }
      }
    }
    if (j.contains("schedule")) {
      const Json& s = j.at("schedule");
      TtaSchedule sch = c.policy.kind == "learnable" ? learnable_default_schedule() : TtaSchedule{};
      read_opt(s, "lr0", sch.lr0);
      read_opt(s, "weight_decay", sch.weight_decay);
      read_opt(s, "decay_factor", sch.decay_factor);
      read_opt(s, "decay_every", sch.decay_every);
      c.schedule = sch;
    }
    read_opt(j, "templates_path", c.templates_path);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bench config: ") + e.what());
  }
  c.validate();
  return c;
}

BenchConfig BenchConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
}

std::vector<ArticulatedObject> load_suite(const BenchConfig& config,
                                          const std::filesystem::path& base_dir) {
  if (config.suite == "builtin") return builtin_suite(config.suite_count, config.suite_seed);
  if (config.suite == "family") return family_suite(config.family, config.suite_count, config.suite_seed);
  std::vector<ArticulatedObject> out;
  for (const auto& p : config.asset_paths) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    out.push_back(load_asset(path));
  }
  return out;
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, std::uint64_t seed) {
  if (spec.kind == "oracle") return std::make_unique<OraclePolicy>();
  if (spec.kind == "perturbed") {
    return std::make_unique<PerturbedPolicy>(PerturbationNoise{spec.p_static, spec.sigma_dir});
  }
  if (spec.kind == "learnable") return std::make_unique<LearnablePolicy>(seed, spec.init_scale);
  if (spec.kind == "bridge") {
    BridgeOptions opts;
    opts.export_dir = spec.export_dir;
    opts.inline_attachments = spec.inline_attachments;
    opts.image_size = spec.image_size;
    opts.share_ground_truth = spec.share_ground_truth;
    return std::make_unique<BridgePolicy>(connect_endpoint(spec.endpoint), opts);
  }
  throw Error(ErrorCode::kConfig, "unknown policy kind '" + spec.kind + "'");
}

BenchReport run_bench(const BenchConfig& config, const std::vector<ArticulatedObject>& suite) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<PromptTemplates> templates;
  if (!config.templates_path.empty()) templates = load_templates(config.templates_path);

  SessionParams params;
  params.max_corrections = config.corrections;
  params.position_correction = config.position_correction;
  params.rotation_correction = config.rotation_correction;
  params.pull = config.pull;
  params.success = config.success;
  params.classify = config.classify;
  params.templates = templates ? &*templates : nullptr;
  const TtaSchedule schedule = config.schedule.value_or(
      config.policy.kind == "learnable" ? learnable_default_schedule() : TtaSchedule{});

  std::vector<EpisodeResult> episodes;
  for (std::size_t si = 0; si < config.seeds.size(); ++si) {
    for (std::size_t oi = 0; oi < suite.size(); ++oi) {
      for (int ep = 0; ep < config.episodes_per_object; ++ep) {
        EpisodeResult r;
        r.object_index = oi;
        r.seed_index = si;
        r.episode = ep;
        const std::uint64_t seed = config.seeds[si];
        r.seed = mix_seed(seed, oi, static_cast<std::uint64_t>(ep));
        r.sample_id = "s" + std::to_string(seed) + "_o" + std::to_string(oi) + "_e" + std::to_string(ep);
        episodes.push_back(std::move(r));
      }
    }
  }

  auto run_one = [&](EpisodeResult& r, Policy* policy, const std::string& policy_error,
                     std::int64_t* iteration) {
    try {
      if (policy == nullptr) throw Error(ErrorCode::kConnection, policy_error);
      const ArticulatedObject& object = suite[r.object_index];
      std::mt19937_64 cam_rng(mix_seed(r.seed, fnv1a("camera")));
      const double yaw = uniform(cam_rng, -config.camera_jitter, config.camera_jitter);
      const double pitch = uniform(cam_rng, -config.camera_jitter, config.camera_jitter);
      const Camera camera = default_camera(object, config.resolution, yaw, pitch);
      SessionLog log = run_session(object, camera, *policy, config.instruction, params, r.sample_id, r.seed);
      if (iteration != nullptr) tta_step(*policy, log, schedule, *iteration);
      r.log = std::move(log);
    } catch (const std::exception& e) {
      r.quarantined = true;
      r.error = e.what();
    }
  };

  const bool parallel = !config.tta && config.policy.kind != "bridge" && config.threads != 1 &&
                        episodes.size() > 1;
  if (parallel) {
    // Without adaptation every policy answer depends only on the sample, so
    // episodes run independently and land in their fixed slots.
    std::size_t workers = config.threads > 0 ? static_cast<std::size_t>(config.threads)
                                             : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, episodes.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < episodes.size(); i = next++) {
          EpisodeResult& r = episodes[i];
          std::unique_ptr<Policy> policy;
          std::string policy_error;
          try {
            policy = make_policy(config.policy, config.seeds[r.seed_index]);
          } catch (const std::exception& e) {
            policy_error = e.what();
          }
          run_one(r, policy.get(), policy_error, nullptr);
        }
      });
    }
    for (auto& t : pool) t.join();
  } else {
    // A bridge connection is shared by every seed; local policies are fresh
    // per seed so adaptation never leaks across seeds.
    std::unique_ptr<Policy> shared_bridge;
    std::string bridge_error;
    std::size_t i = 0;
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      std::unique_ptr<Policy> local;
      Policy* policy = nullptr;
      std::string policy_error;
      try {
        if (config.policy.kind == "bridge") {
          if (!shared_bridge && bridge_error.empty()) shared_bridge = make_policy(config.policy, config.seeds[si]);
          policy = shared_bridge.get();
          policy_error = bridge_error;
        } else {
          local = make_policy(config.policy, config.seeds[si]);
          policy = local.get();
        }
      } catch (const std::exception& e) {
        policy_error = e.what();
        if (config.policy.kind == "bridge") bridge_error = policy_error;
      }
      std::int64_t iteration = 0;
      const std::size_t per_seed = suite.size() * static_cast<std::size_t>(config.episodes_per_object);
      for (std::size_t n = 0; n < per_seed; ++n, ++i) {
        run_one(episodes[i], policy, policy_error, config.tta ? &iteration : nullptr);
      }
    }
  }

  BenchReport report;
  report.config = config.to_json();
  report.max_corrections = config.corrections;
  const auto n_curve = static_cast<std::size_t>(config.corrections) + 1;
  report.per_object.resize(suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) {
    report.per_object[i].name = std::to_string(i) + ":" + suite[i].name();
  }
  report.per_seed.resize(config.seeds.size());
  std::vector<std::size_t> curve_counts(n_curve, 0);
  std::vector<std::vector<std::size_t>> seed_counts(config.seeds.size(), std::vector<std::size_t>(n_curve, 0));
  for (std::size_t si = 0; si < config.seeds.size(); ++si) {
    report.per_seed[si].name = "seed " + std::to_string(config.seeds[si]);
  }
  for (const auto& r : episodes) {
    if (r.quarantined) {
      ++report.quarantined;
      continue;
    }
    const SessionLog& log = *r.log;
    if (log.error) ++report.policy_failures;
    RateRow* rows[] = {&report.per_object[r.object_index], &report.aggregate, &report.per_seed[r.seed_index]};
    for (RateRow* row : rows) {
      ++row->sessions;
      if (log.final_success) ++row->successes;
    }
    if (log.final_success) {
      for (std::size_t c = static_cast<std::size_t>(log.corrections_used); c < n_curve; ++c) {
        ++curve_counts[c];
        ++seed_counts[r.seed_index][c];
      }
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  report.aggregate.name = "ALL";
  report.curve.resize(n_curve);
  for (std::size_t c = 0; c < n_curve; ++c) report.curve[c] = ratio(curve_counts[c], report.aggregate.sessions);
  for (std::size_t si = 0; si < config.seeds.size(); ++si) {
    std::vector<double> sc(n_curve);
    for (std::size_t c = 0; c < n_curve; ++c) sc[c] = ratio(seed_counts[si][c], report.per_seed[si].sessions);
    report.per_seed_curve.push_back(std::move(sc));
  }
  report.episodes = std::move(episodes);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

Json report_to_json(const BenchReport& report) {
  auto row_json = [](const RateRow& r) {
    return Json{{"name", r.name}, {"sessions", r.sessions}, {"successes", r.successes}, {"rate", r.rate()}};
  };
  Json per_object = Json::array();
  for (const auto& r : report.per_object) per_object.push_back(row_json(r));
  Json per_seed = Json::array();
  for (std::size_t i = 0; i < report.per_seed.size(); ++i) {
    Json row = row_json(report.per_seed[i]);
    row["curve"] = report.per_seed_curve[i];
    per_seed.push_back(row);
  }
  Json curve = Json::array();
  for (std::size_t c = 0; c < report.curve.size(); ++c) curve.push_back(Json::array({c, report.curve[c]}));
  Json quarantine = Json::array();
  for (const auto& e : report.episodes) {
    if (e.quarantined) quarantine.push_back({{"sample_id", e.sample_id}, {"error", e.error}});
  }
  return {{"format", "corrsim-bench-report"},
          {"version", 1},
          {"config", report.config},
          {"aggregate", row_json(report.aggregate)},
          {"per_object", per_object},
          {"per_seed", per_seed},
          {"curve", curve},
          {"quarantined", report.quarantined},
          {"quarantine", quarantine},
          {"policy_failures", report.policy_failures}};
}

std::string table_csv(const BenchReport& report) {
  std::string out = "object,sessions,successes,success_rate\n";
  if (report.aggregate.sessions == 0 && report.per_object.empty()) return out;
  for (const auto& r : report.per_object) {
    out += r.name + "," + std::to_string(r.sessions) + "," + std::to_string(r.successes) + "," +
           fixed4(r.rate()) + "\n";
  }
  const auto& a = report.aggregate;
  out += "ALL," + std::to_string(a.sessions) + "," + std::to_string(a.successes) + "," + fixed4(a.rate()) + "\n";
  return out;
}

std::string table_text(const BenchReport& report) {
  std::vector<std::array<std::string, 4>> rows{{"object", "sessions", "successes", "success_rate"}};
  for (const auto& r : report.per_object) {
    rows.push_back({r.name, std::to_string(r.sessions), std::to_string(r.successes), fixed4(r.rate())});
  }
  if (!(report.aggregate.sessions == 0 && report.per_object.empty())) {
    const auto& a = report.aggregate;
    rows.push_back({"ALL", std::to_string(a.sessions), std::to_string(a.successes), fixed4(a.rate())});
  }
  std::array<std::size_t, 4> width{};
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < 4; ++k) width[k] = std::max(width[k], r[k].size());
  }
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < 4; ++k) {
      const std::string pad(width[k] - r[k].size(), ' ');
      out += k == 0 ? r[k] + pad : "  " + pad + r[k];
    }
    out += "\n";
  }
  return out;
}

std::string curve_csv(const BenchReport& report) {
  std::string out = "corrections,success_rate\n";
  for (std::size_t c = 0; c < report.curve.size(); ++c) {
    out += std::to_string(c) + "," + fixed4(report.curve[c]) + "\n";
  }
  return out;
}

std::vector<std::filesystem::path> emit_tables(const BenchReport& report,
                                               const std::filesystem::path& directory) {
  const std::vector<std::filesystem::path> paths{directory / "table.csv", directory / "table.txt",
                                                 directory / "curve.csv"};
  write_text(paths[0], table_csv(report));
  write_text(paths[1], table_text(report));
  write_text(paths[2], curve_csv(report));
  return paths;
}

void write_bench_outputs(const BenchReport& report, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  write_text(directory / "report.json", report_to_json(report).dump(2) + "\n");
  std::vector<Json> sessions;
  std::vector<Json> quarantine;
  for (const auto& e : report.episodes) {
    if (e.log) sessions.push_back(to_json(*e.log));
    if (e.quarantined) quarantine.push_back({{"sample_id", e.sample_id}, {"seed", e.seed}, {"error", e.error}});
  }
  write_jsonl(directory / "sessions.jsonl", sessions);
  write_jsonl(directory / "quarantine.jsonl", quarantine);
  write_text(directory / "timing.json",
             Json{{"runtime_seconds", report.runtime_seconds},
                  {"sessions", report.episodes.size()}}.dump(2) + "\n");
  emit_tables(report, directory);
}

std::vector<std::pair<std::string, BenchConfig>> ablation_arms(const BenchConfig& config) {
  std::vector<std::pair<std::string, BenchConfig>> arms;
  auto arm = [&](const char* name, bool pos, bool rot) {
    BenchConfig c = config;
    c.position_correction = pos;
    c.rotation_correction = rot;
    arms.emplace_back(name, c);
  };
  arm("full", true, true);
  arm("wo_pos", false, true);
  arm("wo_rot", true, false);
  arm("none", false, false);
  if (config.tta) {
    BenchConfig c = config;
    c.tta = false;
    arms.emplace_back("wo_tta", c);
  }
  return arms;
}

std::vector<std::string> replay_session(const SessionLog& log, const PullParams& pull,
                                        const SuccessParams& success, double probe_distance_scale) {
  std::vector<std::string> mismatches;
  const ArticulatedObject object = parse_asset(log.object_asset);
  const Observation clean = render(object, log.camera);
  for (const auto& a : log.attempts) {
    const std::string tag = log.sample_id + " attempt " + std::to_string(a.index);
    ArticulatedObject scene = object;
    const Trajectory traj = execute_pull(scene, clean, a.action, pull);
    if (!(traj == a.trajectory)) mismatches.push_back(tag + ": trajectory differs");
    const SuccessReport rep = evaluate_success(object, a.action, traj, success);
    if (!(rep == a.report)) mismatches.push_back(tag + ": success report differs");
    if (a.probe) {
      ArticulatedObject probe_scene = object;
      const Trajectory probe =
          probe_normal(probe_scene, clean, a.action.contact_pixel, pull, probe_distance_scale);
      if (!(probe == *a.probe)) mismatches.push_back(tag + ": probe trajectory differs");
    }
  }
  const bool last_ok = !log.attempts.empty() && log.attempts.back().report.success;
  if (last_ok != log.final_success) mismatches.push_back(log.sample_id + ": final_success inconsistent");
  return mismatches;
}

}  // namespace corrsim
