#include "corrsim/datagen.hpp"

#include <cmath>
#include <map>

#include "corrsim/asset.hpp"
#include "corrsim/error.hpp"
#include "corrsim/export.hpp"
#include "corrsim/fie.hpp"
#include "corrsim/rng.hpp"

namespace corrsim {

Json DatagenConfig::to_json() const {
  return {{"episodes", episodes},
          {"seed", seed},
          {"resolution", resolution},
          {"camera_jitter", camera_jitter},
          {"push_probability", push_probability},
          {"max_trials", max_trials},
          {"position_pixels", position_pixels},
          {"balanced_positions", balanced_positions},
          {"axis_noise_degrees", axis_noise_degrees},
          {"pull",
           {{"total_distance", pull.total_distance},
            {"frames", pull.frames},
            {"grip_alignment_threshold", pull.grip_alignment_threshold},
            {"movement_epsilon", pull.movement_epsilon}}},
          {"success",
           {{"min_displacement", success.min_displacement},
            {"min_range_fraction", success.min_range_fraction},
            {"min_direction_dot", success.min_direction_dot}}}};
}

DatagenConfig DatagenConfig::from_json(const Json& j) {
  DatagenConfig c;
  try {
    c.episodes = j.value("episodes", c.episodes);
    c.seed = j.value("seed", c.seed);
    c.resolution = j.value("resolution", c.resolution);
    c.camera_jitter = j.value("camera_jitter", c.camera_jitter);
    c.push_probability = j.value("push_probability", c.push_probability);
    c.max_trials = j.value("max_trials", c.max_trials);
    c.position_pixels = j.value("position_pixels", c.position_pixels);
    c.balanced_positions = j.value("balanced_positions", c.balanced_positions);
    c.axis_noise_degrees = j.value("axis_noise_degrees", c.axis_noise_degrees);
    if (j.contains("pull")) {
      const auto& p = j.at("pull");
      c.pull.total_distance = p.value("total_distance", c.pull.total_distance);
      c.pull.frames = p.value("frames", c.pull.frames);
      c.pull.grip_alignment_threshold = p.value("grip_alignment_threshold", c.pull.grip_alignment_threshold);
      c.pull.movement_epsilon = p.value("movement_epsilon", c.pull.movement_epsilon);
    }
    if (j.contains("success")) {
      const auto& s = j.at("success");
      c.success.min_displacement = s.value("min_displacement", c.success.min_displacement);
      c.success.min_range_fraction = s.value("min_range_fraction", c.success.min_range_fraction);
      c.success.min_direction_dot = s.value("min_direction_dot", c.success.min_direction_dot);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("datagen config: ") + e.what());
  }
  return c;
}

namespace {

Camera jittered_camera(const ArticulatedObject& object, const DatagenConfig& config,
                       std::mt19937_64& rng) {
  const double yaw = uniform(rng, -config.camera_jitter, config.camera_jitter);
  const double pitch = uniform(rng, -config.camera_jitter, config.camera_jitter);
  return default_camera(object, config.resolution, yaw, pitch);
}

Vec3 random_unit(std::mt19937_64& rng) {
  while (true) {
    const Vec3 v(normal(rng), normal(rng), normal(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

std::vector<Pixel> pixels_where(const Observation& obs, bool (*pred)(const Observation&, Pixel)) {
  std::vector<Pixel> out;
  for (int v = 0; v < obs.part_id.height(); ++v) {
    for (int u = 0; u < obs.part_id.width(); ++u) {
      if (pred(obs, {u, v})) out.push_back({u, v});
    }
  }
  return out;
}

}  // namespace

SamplingResult sample_successful_episodes(const std::vector<ArticulatedObject>& objects,
                                          const DatagenConfig& config) {
  if (objects.empty()) throw Error(ErrorCode::kInvalidParams, "empty object set");
  config.pull.validate();
  bool any_movable = false;
  for (const auto& o : objects) {
    for (const auto& p : o.parts()) any_movable = any_movable || p.movable;
  }
  if (!any_movable && config.episodes > 0) {
    throw Error(ErrorCode::kExhaustedBudget, "no object has a movable part");
  }
  std::mt19937_64 rng(mix_seed(config.seed, fnv1a("episodes")));
  SamplingResult result;
  while (static_cast<int>(result.samples.size()) < config.episodes) {
    if (result.trials >= config.max_trials) {
      throw Error(ErrorCode::kExhaustedBudget,
                  "only " + std::to_string(result.samples.size()) + " successes in " +
                      std::to_string(result.trials) + " trials");
    }
    ++result.trials;
    const auto index = static_cast<int>(uniform_index(rng, objects.size()));
    const ArticulatedObject& object = objects[static_cast<std::size_t>(index)];
    const Camera camera = jittered_camera(object, config, rng);
    const Observation obs = render(object, camera);
    const auto fg = pixels_where(obs, [](const Observation& o, Pixel p) { return o.foreground(p); });
    const Pixel pixel = fg[uniform_index(rng, fg.size())];
    const Vec3 direction = decode_direction(encode_direction(random_unit(rng)));
    const Primitive primitive =
        bernoulli(rng, config.push_probability) ? Primitive::kPush : Primitive::kPull;
    const std::uint64_t episode_seed = rng();

    const Action action{pixel, direction, primitive};
    ArticulatedObject scene = object;
    const Trajectory traj = execute_pull(scene, obs, action, config.pull);
    const SuccessReport report = evaluate_success(object, action, traj, config.success);
    if (!report.success) continue;
    result.samples.push_back({index, object.name(), camera, action, report, episode_seed});
  }
  return result;
}

std::string to_string(VqaKind kind) {
  switch (kind) {
    case VqaKind::kMaskClassification: return "mask_classification";
    case VqaKind::kMaskPositionReasoning: return "mask_position_reasoning";
    case VqaKind::kCorrectBasedOnMask: return "correct_based_on_mask";
    case VqaKind::kRotationCorrection: return "rotation_correction";
  }
  return "mask_classification";
}

Vec3 rotate_about_perpendicular(const Vec3& axis, double angle, double phi) {
  const Vec3 a = axis.normalized();
  const Vec3 e1 = a.unitOrthogonal();
  const Vec3 e2 = a.cross(e1);
  const Vec3 k = std::cos(phi) * e1 + std::sin(phi) * e2;
  return (a * std::cos(angle) + k.cross(a) * std::sin(angle)).normalized();
}

Vec3 inject_axis_noise(const Vec3& axis, std::mt19937_64& rng, double max_degrees) {
  const double max_rad = max_degrees * std::numbers::pi / 180.0;
  const double theta = uniform(rng, -max_rad, max_rad);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return rotate_about_perpendicular(axis, theta, phi);
}

AugmentedSample augment_sample(const ArticulatedObject& object, const EpisodeSample& sample,
                               int sample_index, const DatagenConfig& config,
                               const PromptTemplates& templates) {
  std::mt19937_64 rng(mix_seed(sample.seed, fnv1a("augment")));
  AugmentedSample out;
  out.clean = render(object, sample.camera);
  out.masked = out.clean;
  const std::string id = "s" + std::to_string(sample_index);
  const Instruction instruction{"Open the articulated part.", sample.action.primitive};

  // Mask one visible static part, chosen uniformly.
  std::vector<Pixel> seeds;
  std::map<int, Pixel> first_pixel;
  for (int v = 0; v < out.clean.part_id.height(); ++v) {
    for (int u = 0; u < out.clean.part_id.width(); ++u) {
      const int pid = out.clean.part_id(u, v);
      if (pid >= 0 && !object.part(pid).movable && !first_pixel.contains(pid)) first_pixel[pid] = {u, v};
    }
  }
  for (const auto& [pid, p] : first_pixel) seeds.push_back(p);

  if (!seeds.empty()) {
    const Pixel seed_px = seeds[uniform_index(rng, seeds.size())];
    const Mask mask = segment_unmovable(object, out.clean, seed_px);
    out.masked = overlay_mask(out.clean, mask.pixels);
    const BoolGrid& layer = out.masked.mask_layer;

    out.records.push_back({VqaKind::kMaskClassification, sample_index, id + "_masked",
                           templates.get("cot_1"), format_yes_no(true), layer, {}});
    out.records.push_back({VqaKind::kMaskClassification, sample_index, id + "_clean",
                           templates.get("cot_1"), format_yes_no(false), BoolGrid(), {}});

    const auto fg = pixels_where(out.masked, [](const Observation& o, Pixel p) { return o.foreground(p); });
    std::vector<Pixel> on;
    std::vector<Pixel> off;
    for (const Pixel p : fg) (layer[p] ? on : off).push_back(p);
    VqaRecord pos{VqaKind::kMaskPositionReasoning, sample_index, id + "_masked", "", "", layer, {}};
    std::string points;
    for (int i = 0; i < config.position_pixels; ++i) {
      Pixel p;
      if (config.balanced_positions && !on.empty() && !off.empty()) {
        const auto& pool = (i % 2 == 0) ? on : off;
        p = pool[uniform_index(rng, pool.size())];
      } else {
        p = fg[uniform_index(rng, fg.size())];
      }
      pos.query_pixels.push_back(p);
      points += (i ? ", " : "") + format_pixel(p);
      pos.answer += (i ? " " : "") + format_yes_no(layer[p] != 0);
    }
    pos.prompt = fill_template(templates.get("mask_position"), {{"points", points}});
    out.records.push_back(std::move(pos));

    out.records.push_back({VqaKind::kCorrectBasedOnMask, sample_index, id + "_masked",
                           fill_template(templates.get("cot_4"),
                                         {{"instruction", instruction.text},
                                          {"primitive", to_string(instruction.primitive)}}),
                           format_action_answer(sample.action), layer, {}});
  }

  const Pixel contact = sample.action.contact_pixel;
  const int part_id = out.clean.part_id[contact];
  const Joint& joint = *object.part(part_id).joint;
  const Vec3 world = lift_pixel(out.clean, contact);
  const Vec3 noisy_axis = inject_axis_noise(joint.axis, rng, config.axis_noise_degrees);
  JointEstimate estimate;
  estimate.kind = joint.kind == JointKind::kPrismatic ? EstimatedKind::kPrismatic : EstimatedKind::kRevolute;
  estimate.axis = noisy_axis;
  out.records.push_back({VqaKind::kRotationCorrection, sample_index, id + "_clean",
                         build_rotation_prompt(estimate, contact, surface_normal(object, part_id, world),
                                               templates),
                         format_bins(encode_direction(sample.action.gripper_direction)), BoolGrid(),
                         {}});
  return out;
}

CorpusSummary generate_corpus(const std::vector<ArticulatedObject>& objects,
                              const DatagenConfig& config, const std::filesystem::path& directory) {
  const SamplingResult sampled = sample_successful_episodes(objects, config);
  const auto obs_dir = directory / "observations";
  std::filesystem::create_directories(obs_dir);
  std::filesystem::create_directories(directory / "objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    save_asset(objects[i], directory / "objects" / ("object_" + std::to_string(i) + ".asset"));
  }

  CorpusSummary summary;
  summary.episodes = sampled.samples.size();
  summary.trials = sampled.trials;
  std::vector<Json> episodes;
  std::vector<Json> records;
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < sampled.samples.size(); ++i) {
    const EpisodeSample& s = sampled.samples[i];
    const auto& object = objects[static_cast<std::size_t>(s.object_index)];
    const AugmentedSample aug = augment_sample(object, s, static_cast<int>(i), config);
    const std::string id = "s" + std::to_string(i);
    export_observation(aug.clean, obs_dir, id + "_clean", 0);
    if (any(aug.masked.mask_layer)) export_observation(aug.masked, obs_dir, id + "_masked", 0);
    episodes.push_back({{"index", i},
                        {"object_index", s.object_index},
                        {"object", s.object_name},
                        {"camera", to_json(s.camera)},
                        {"action", to_json(s.action)},
                        {"report", to_json(s.report)},
                        {"seed", s.seed}});
    for (const auto& r : aug.records) {
      records.push_back({{"kind", to_string(r.kind)},
                         {"sample", r.sample_index},
                         {"observation", "observations/" + r.observation_ref},
                         {"prompt", r.prompt},
                         {"answer", r.answer}});
      ++counts[to_string(r.kind)];
    }
  }
  summary.records = records.size();
  write_jsonl(directory / "episodes.jsonl", episodes);
  write_jsonl(directory / "corpus.jsonl", records);

  const std::string config_text = config.to_json().dump();
  summary.config_hash = fnv1a(config_text);
  Json objects_json = Json::array();
  for (const auto& o : objects) objects_json.push_back(o.name());
  const Json manifest = {{"format", "corrsim-corpus"},
                         {"version", 1},
                         {"seed", config.seed},
                         {"config", config.to_json()},
                         {"config_hash", summary.config_hash},
                         {"objects", objects_json},
                         {"episodes", summary.episodes},
                         {"trials", summary.trials},
                         {"acceptance_rate", sampled.acceptance_rate()},
                         {"records", counts},
                         {"templates", kPromptTemplateVersion}};
  write_text(directory / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

}  // namespace corrsim
