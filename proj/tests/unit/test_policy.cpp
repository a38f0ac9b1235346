#include <cmath>
#include <numbers>
#include <random>

#include "corrsim/error.hpp"
#include "corrsim/objects.hpp"
#include "corrsim/policy.hpp"
#include "corrsim/prompts.hpp"
#include "corrsim/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrsim;

TEST_CASE("bin encoding examples") {
  CHECK(encode_components(Vec3(-1, 0, 1)).bins == std::array<int, 3>{0, 50, 99});
  CHECK(encode_direction(Vec3(1, 0, 0)).bins == std::array<int, 3>{99, 50, 50});
  CHECK(encode_direction(Vec3(0, 0, -1)).bins == std::array<int, 3>{50, 50, 0});
  const Vec3 c = decode_direction_centers(DirectionBins{{0, 50, 99}});
  CHECK(c.x() == doctest::Approx(-0.99));
  CHECK(c.y() == doctest::Approx(0.01));
  CHECK(c.z() == doctest::Approx(0.99));
  CHECK_THROWS_AS(encode_direction(Vec3(1, 1, 0)), Error);
  CHECK_THROWS_AS(decode_direction_centers(DirectionBins{{100, 0, 0}}), Error);
  CHECK_THROWS_AS(decode_direction_centers(DirectionBins{{-1, 0, 0}}), Error);
}

TEST_CASE("bin scan: component error and idempotence") {
  // Independent bin index: count the lower edges -1 + 0.02 k that x reaches,
  // with edges built from integers to avoid accumulated error.
  auto oracle_bin = [](double x) {
    int b = 0;
    for (int k = 1; k < kDirectionBins; ++k) {
      if (x >= (static_cast<double>(2 * k) - 100.0) / 100.0) b = k;
    }
    return b;
  };
  for (int i = 0; i <= 20000; ++i) {
    const double x = -1.0 + i * 1e-4;
    const int b = encode_components(Vec3(x, x, x)).bins[0];
    // Values within rounding distance of an edge may fall on either side.
    const double edge_distance = std::abs(std::remainder(x + 1.0, kBinWidth));
    if (edge_distance > 1e-12) CHECK(b == oracle_bin(x));
    const double center = decode_direction_centers(DirectionBins{{b, b, b}}).x();
    CHECK(std::abs(center - x) <= 0.01 + 1e-12);
  }
  for (int b = 0; b < kDirectionBins; ++b) {
    const DirectionBins bins{{b, b, b}};
    CHECK(encode_components(decode_direction_centers(bins)) == bins);
  }
}

TEST_CASE("renormalized decode of unit vectors stays inside the bin") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 v = test::random_unit(rng);
    const DirectionBins bins = encode_direction(v);
    const Vec3 d = decode_direction(bins);
    CHECK(std::abs(d.norm() - 1.0) < 1e-12);
    CHECK((d - v).cwiseAbs().maxCoeff() < 0.03);
  }
  CHECK_NOTHROW(decode_direction(DirectionBins{{49, 50, 50}}));
}

TEST_CASE("TTA learning-rate schedule") {
  const TtaSchedule s;
  CHECK(s.lr(0) == 5e-8);
  CHECK(s.lr(299) == 5e-8);
  CHECK(s.lr(300) == 1.5e-8);
  CHECK(s.lr(600) == doctest::Approx(4.5e-9).epsilon(1e-15));
  CHECK(s.weight_decay == 2e-3);
  CHECK(learnable_default_schedule().lr(300) == doctest::Approx(0.3));
}

TEST_CASE("task kind strings") {
  for (auto k : {TaskKind::kPredict, TaskKind::kPositionCot, TaskKind::kRotationCorrect}) {
    CHECK(task_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(task_kind_from_string("dance"), Error);
}

TEST_CASE("oracle picks the door and pulls along its opening motion") {
  const auto obj = test::door_object();
  const Observation obs = render(obj, default_camera(obj, 64));
  const Action a = oracle_action(obj, obs, Primitive::kPull);
  REQUIRE(obs.part_id[a.contact_pixel] == 1);
  const Vec3 x = lift_pixel(obs, a.contact_pixel);
  ArticulatedObject ahead = obj;
  const double h = 1e-6;
  ahead.set_q(1, h);
  const Vec3 local = part_point_local(obj, 1, x);
  const Vec3 fd = (part_point_world(ahead, 1, local) - x) / h;
  CHECK((a.gripper_direction - fd.normalized()).norm() < 1e-6);

  const Action push = oracle_action(obj, obs, Primitive::kPush);
  CHECK(push.contact_pixel == a.contact_pixel);
  CHECK((push.gripper_direction + a.gripper_direction).norm() < 1e-12);
}

TEST_CASE("oracle direction points toward the larger remaining range") {
  auto obj = test::drawer_object();
  obj.set_q(1, 0.25);
  const Observation obs = render(obj, default_camera(obj, 64));
  const Action a = oracle_action(obj, obs, Primitive::kPull);
  CHECK(a.gripper_direction.x() == doctest::Approx(-1.0));
}

TEST_CASE("oracle honours exclusions and fails without movable parts") {
  const auto obj = test::drawer_object();
  const Observation obs = render(obj, default_camera(obj, 64));
  BoolGrid all = interaction_map(obj, obs);
  CHECK_THROWS_AS(oracle_action(obj, obs, Primitive::kPull, &all), Error);
  const auto block = test::static_object();
  CHECK_THROWS_AS(oracle_action(block, render(block, default_camera(block, 64)), Primitive::kPull), Error);
}

TEST_CASE("oracle actions succeed on every builtin object") {
  for (const auto& obj : builtin_suite(22, 17)) {
    const Observation obs = render(obj, default_camera(obj, 64, 0.1, 0.05));
    for (auto prim : {Primitive::kPull}) {
      const Action a = oracle_action(obj, obs, prim);
      ArticulatedObject scene = obj;
      const Trajectory t = execute_pull(scene, obs, a, {});
      CHECK_MESSAGE(evaluate_success(obj, a, t).success, obj.name());
    }
  }
}

TEST_CASE("perturbed policy with zero noise answers like the oracle") {
  const auto suite = builtin_suite(20, 4);
  int scenes = 0;
  for (std::uint64_t k = 0; scenes < 1000; ++k) {
    const auto& obj = suite[k % suite.size()];
    std::mt19937_64 rng(mix_seed(77, k));
    const Camera cam = default_camera(obj, 32, uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2));
    const Observation obs = render(obj, cam);
    if (!any(interaction_map(obj, obs))) continue;
    ++scenes;
    OraclePolicy oracle;
    PerturbedPolicy perturbed({0.0, 0.0});
    const Instruction ins;
    const SampleContext ctx{"s", &obj, cam, ins, k};
    oracle.begin_sample(ctx);
    perturbed.begin_sample(ctx);
    PolicyRequest req;
    req.observation = &obs;
    req.prompt = build_predict_prompt(ins);
    CHECK(oracle.respond(req) == perturbed.respond(req));
  }
}

TEST_CASE("perturbed policy with p_static = 1 contacts a static part") {
  const auto obj = test::drawer_object();
  const Camera cam = default_camera(obj, 64);
  const Observation obs = render(obj, cam);
  PerturbedPolicy p({1.0, 0.0});
  p.begin_sample({"s", &obj, cam, {}, 3});
  PolicyRequest req;
  req.observation = &obs;
  const auto action = parse_action(p.respond(req), Primitive::kPull);
  REQUIRE(action);
  CHECK(obs.part_id[action->contact_pixel] == 0);
}

TEST_CASE("perturbed direction noise has the requested angle") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const Vec3 d = test::random_unit(rng);
    const double angle = uniform(rng, 0.0, 3.0);
    CHECK(angle_between(perturb_direction(d, angle, rng), d) == doctest::Approx(angle).epsilon(1e-9));
  }
}

TEST_CASE("axis-implied directions") {
  RotationFields f;
  f.kind = EstimatedKind::kPrismatic;
  f.axis = Vec3(0, 0, 2);
  CHECK(axis_implied_direction(f) == Vec3::UnitZ());
  f.kind = EstimatedKind::kRevolute;
  f.axis = Vec3::UnitZ();
  f.normal = Vec3(1, 0, 1).normalized();
  CHECK((axis_implied_direction(f) - Vec3::UnitX()).norm() < 1e-12);
  f.normal = Vec3::UnitZ();
  f.previous_direction = Vec3(0, 1, 1).normalized();
  CHECK((axis_implied_direction(f) - Vec3::UnitY()).norm() < 1e-12);
  f.previous_direction = Vec3::UnitZ();
  CHECK(std::abs(axis_implied_direction(f).dot(Vec3::UnitZ())) < 1e-12);
}

TEST_CASE("learnable policy: masked logits fall below every unmasked logit") {
  const auto obj = test::drawer_object();
  const Camera cam = default_camera(obj, 32);
  const Observation obs = render(obj, cam);
  LearnablePolicy policy(5);
  policy.begin_sample({"s", &obj, cam, {}, 0});
  const Pixel best = policy.best_pixel(obs, nullptr);

  ExperienceItem item;
  item.kind = ExperienceKind::kMaskPositionVqa;
  item.labeled_pixels = {{best, true}, {{0, 0}, false}};
  const Grid<double> before = policy.pixel_logits();
  const double lr = 0.5;
  policy.adapt(std::span(&item, 1), lr, 0.0);
  const Grid<double>& after = policy.pixel_logits();
  double min_other = 1e300;
  for (std::size_t i = 0; i < after.size(); ++i) {
    if (i != static_cast<std::size_t>(best.v * 32 + best.u)) {
      CHECK(after.data()[i] == before.data()[i]);
      min_other = std::min(min_other, after.data()[i]);
    }
  }
  CHECK(after[best] == doctest::Approx(min_other - lr));
  CHECK_FALSE(policy.best_pixel(obs, nullptr) == best);
}

TEST_CASE("learnable policy: zero learning rate changes nothing") {
  const auto obj = test::drawer_object();
  const Camera cam = default_camera(obj, 32);
  LearnablePolicy policy(6);
  policy.begin_sample({"s", &obj, cam, {}, 0});
  ExperienceItem sup;
  sup.kind = ExperienceKind::kCorrectedPoseSupervision;
  sup.target = Action{{3, 4}, Vec3::UnitX(), Primitive::kPull};
  ExperienceItem pos;
  pos.kind = ExperienceKind::kMaskPositionVqa;
  pos.labeled_pixels = {{{1, 1}, true}};
  const std::vector<ExperienceItem> items{sup, pos};
  const auto logits = policy.pixel_logits();
  const auto heads = policy.direction_logits();
  policy.adapt(items, 0.0, 2e-3);
  CHECK(policy.pixel_logits() == logits);
  CHECK(policy.direction_logits() == heads);
}

TEST_CASE("learnable policy: corrected-pose supervision moves the argmax to the target") {
  const auto obj = test::drawer_object();
  const Camera cam = default_camera(obj, 32);
  const Observation obs = render(obj, cam);
  LearnablePolicy policy(7);
  policy.begin_sample({"s", &obj, cam, {}, 0});
  const Action target = oracle_action(obj, obs, Primitive::kPull);
  ExperienceItem sup;
  sup.kind = ExperienceKind::kCorrectedPoseSupervision;
  sup.target = target;
  policy.adapt(std::span(&sup, 1), 1.0, 2e-3);
  CHECK(policy.best_bins() == encode_direction(target.gripper_direction));
  CHECK(policy.best_pixel(obs, nullptr) == target.contact_pixel);
}

TEST_CASE("learnable policy is deterministic per seed") {
  LearnablePolicy a(9), b(9), c(10);
  CHECK(a.direction_logits() == b.direction_logits());
  CHECK_FALSE(a.direction_logits() == c.direction_logits());
}
