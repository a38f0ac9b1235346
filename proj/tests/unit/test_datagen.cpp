#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "corrsim/datagen.hpp"
#include "corrsim/error.hpp"
#include "corrsim/objects.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrsim;

namespace fs = std::filesystem;

namespace {

/// Asymptotic Kolmogorov survival function P(K > x).
double kolmogorov_p(double x) {
  if (x < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    sum += (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * x * x);
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS p-value of `xs` against U(0, 1).
double ks_uniform_p(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d = std::max({d, (i + 1) / n - xs[i], xs[i] - i / n});
  }
  const double sn = std::sqrt(n);
  return kolmogorov_p((sn + 0.12 + 0.11 / sn) * d);
}

DatagenConfig small_config() {
  DatagenConfig c;
  c.episodes = 12;
  c.seed = 4;
  c.resolution = 32;
  return c;
}

}  // namespace

TEST_CASE("KS helper rejects a skewed sample") {
  std::mt19937_64 rng(1);
  std::vector<double> ok;
  std::vector<double> skewed;
  for (int i = 0; i < 5000; ++i) {
    const double u = std::uniform_real_distribution<double>(0, 1)(rng);
    ok.push_back(u);
    skewed.push_back(u * u);
  }
  CHECK(ks_uniform_p(ok) > 0.01);
  CHECK(ks_uniform_p(skewed) < 1e-6);
}

TEST_CASE("axis noise: uniform angle within the bound, uniform azimuth") {
  std::mt19937_64 rng(99);
  const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
  // Reference frame independent of the implementation's choice.
  const Vec3 e1 = axis.cross(Vec3::UnitX()).normalized();
  const Vec3 e2 = axis.cross(e1);
  const double max_rad = 20.0 * std::numbers::pi / 180.0;
  std::vector<double> angles;
  std::vector<double> azimuths;
  double largest = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Vec3 n = inject_axis_noise(axis, rng, 20.0);
    CHECK(std::abs(n.norm() - 1.0) < 1e-12);
    const double angle = std::atan2(n.cross(axis).norm(), n.dot(axis));
    largest = std::max(largest, angle);
    angles.push_back(angle / max_rad);
    const Vec3 off = n - n.dot(axis) * axis;
    if (off.norm() > 1e-9) {
      azimuths.push_back((std::atan2(off.dot(e2), off.dot(e1)) + std::numbers::pi) / (2 * std::numbers::pi));
    }
  }
  CHECK(largest <= max_rad + 1e-12);
  CHECK(ks_uniform_p(angles) > 0.01);
  CHECK(ks_uniform_p(azimuths) > 0.01);
}

TEST_CASE("rotating about a perpendicular") {
  const Vec3 a = Vec3::UnitZ();
  for (double phi : {0.0, 1.0, 4.0}) {
    const Vec3 r = rotate_about_perpendicular(a, 0.4, phi);
    CHECK(std::acos(r.dot(a)) == doctest::Approx(0.4));
  }
  CHECK((rotate_about_perpendicular(a, 0.0, 2.0) - a).norm() < 1e-15);
}

TEST_CASE("rejection sampling is deterministic and only keeps successes") {
  const auto objects = builtin_suite(5, 2);
  const DatagenConfig c = small_config();
  const SamplingResult a = sample_successful_episodes(objects, c);
  const SamplingResult b = sample_successful_episodes(objects, c);
  REQUIRE(a.samples.size() == 12);
  CHECK(a.samples == b.samples);
  CHECK(a.trials == b.trials);
  CHECK(a.trials >= 12);
  for (const auto& s : a.samples) {
    const auto& obj = objects[static_cast<std::size_t>(s.object_index)];
    CHECK(s.report.success);
    CHECK((decode_direction(encode_direction(s.action.gripper_direction)) - s.action.gripper_direction).norm() <
          1e-12);
    const Observation obs = render(obj, s.camera);
    ArticulatedObject scene = obj;
    const Trajectory t = execute_pull(scene, obs, s.action, c.pull);
    CHECK(evaluate_success(obj, s.action, t, c.success).success);
  }
  DatagenConfig other = c;
  other.seed = 5;
  CHECK_FALSE(sample_successful_episodes(objects, other).samples == a.samples);
}

TEST_CASE("sampling failures") {
  const auto block = test::static_object();
  DatagenConfig c = small_config();
  try {
    sample_successful_episodes({block}, c);
    FAIL("expected exhaustion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kExhaustedBudget);
  }
  c.max_trials = 3;
  c.episodes = 1000;
  try {
    sample_successful_episodes(builtin_suite(3, 0), c);
    FAIL("expected exhaustion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kExhaustedBudget);
  }
  try {
    sample_successful_episodes({}, c);
    FAIL("expected invalid params");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidParams);
  }
  c.episodes = 0;
  CHECK(sample_successful_episodes({block}, c).samples.empty());
}

TEST_CASE("augmented records are consistent with their data") {
  const auto objects = builtin_suite(8, 6);
  DatagenConfig c = small_config();
  c.episodes = 30;
  c.balanced_positions = true;
  const SamplingResult sampled = sample_successful_episodes(objects, c);
  int with_mask = 0;
  for (std::size_t i = 0; i < sampled.samples.size(); ++i) {
    const EpisodeSample& s = sampled.samples[i];
    const auto& obj = objects[static_cast<std::size_t>(s.object_index)];
    const AugmentedSample aug = augment_sample(obj, s, static_cast<int>(i), c);
    const AugmentedSample again = augment_sample(obj, s, static_cast<int>(i), c);
    REQUIRE(aug.records.size() == again.records.size());
    for (std::size_t k = 0; k < aug.records.size(); ++k) CHECK(aug.records[k].answer == again.records[k].answer);

    const bool masked = any(aug.masked.mask_layer);
    CHECK(aug.records.size() == (masked ? 5u : 1u));
    CHECK(aug.records.back().kind == VqaKind::kRotationCorrection);
    CHECK(aug.records.back().answer == format_bins(encode_direction(s.action.gripper_direction)));
    if (!masked) continue;
    ++with_mask;
    const BoolGrid& layer = aug.masked.mask_layer;
    for (std::size_t p = 0; p < layer.size(); ++p) {
      if (!layer.data()[p]) continue;
      const int pid = aug.clean.part_id.data()[p];
      REQUIRE(pid >= 0);
      CHECK_FALSE(obj.part(pid).movable);
    }
    CHECK(aug.records[0].answer == "Yes");
    CHECK(aug.records[1].answer == "No");

    const VqaRecord& pos = aug.records[2];
    REQUIRE(pos.query_pixels.size() == static_cast<std::size_t>(c.position_pixels));
    std::string expected;
    int on = 0;
    for (std::size_t q = 0; q < pos.query_pixels.size(); ++q) {
      const bool hit = layer[pos.query_pixels[q]] != 0;
      on += hit;
      expected += (q ? " " : "") + std::string(hit ? "Yes" : "No");
    }
    CHECK(pos.answer == expected);
    CHECK(on == c.position_pixels / 2);

    const VqaRecord& fix = aug.records[3];
    CHECK(fix.kind == VqaKind::kCorrectBasedOnMask);
    const auto action = parse_action(fix.answer, s.action.primitive);
    REQUIRE(action);
    CHECK_FALSE(layer[action->contact_pixel]);
    ArticulatedObject scene = obj;
    const Trajectory t = execute_pull(scene, aug.clean, *action, c.pull);
    CHECK(evaluate_success(obj, *action, t, c.success).success);
  }
  CHECK(with_mask > 10);
}

TEST_CASE("corpus directory and manifest") {
  const fs::path dir = fs::temp_directory_path() / "corrsim-datagen-test";
  fs::remove_all(dir);
  const auto objects = builtin_suite(4, 1);
  const DatagenConfig c = small_config();
  const CorpusSummary summary = generate_corpus(objects, c, dir);
  CHECK(summary.episodes == 12);
  const Json manifest = Json::parse(read_text(dir / "manifest.json"));
  CHECK(manifest.at("format") == "corrsim-corpus");
  CHECK(manifest.at("episodes") == 12);
  CHECK(manifest.at("trials") == summary.trials);
  CHECK(manifest.at("config_hash") == summary.config_hash);
  CHECK(DatagenConfig::from_json(manifest.at("config")).to_json() == c.to_json());
  std::size_t total = 0;
  for (const auto& [kind, n] : manifest.at("records").items()) total += n.get<std::size_t>();
  CHECK(total == summary.records);
  const auto records = read_jsonl(dir / "corpus.jsonl");
  CHECK(records.size() == summary.records);
  for (const auto& r : records) {
    const std::string obs = r.at("observation").get<std::string>();
    CHECK(fs::exists(dir / (obs + "_depth.pgm")));
  }
  CHECK(read_jsonl(dir / "episodes.jsonl").size() == 12);
  CHECK(fs::exists(dir / "objects" / "object_3.asset"));

  const std::string first = read_text(dir / "corpus.jsonl");
  fs::remove_all(dir);
  generate_corpus(objects, c, dir);
  CHECK(read_text(dir / "corpus.jsonl") == first);
  fs::remove_all(dir);
}
