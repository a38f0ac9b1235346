#include <cmath>
#include <random>

#include "corrsim/error.hpp"
#include "corrsim/objects.hpp"
#include "corrsim/scene.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrsim;

namespace {

// Front view looking along -x at the cabinet, 1.28 m wide frame.
Camera front_camera() {
  Camera c;
  c.view_direction = -Vec3::UnitX();
  c.up = Vec3::UnitZ();
  c.frame_center = Vec3(1.0, 0.0, 0.5);
  c.width = 64;
  c.height = 64;
  c.pixel_size = 0.02;
  return c.normalized();
}

}  // namespace

TEST_CASE("camera validation") {
  Camera c = front_camera();
  c.width = 8;
  CHECK_THROWS_AS(c.normalized(), Error);
  c = front_camera();
  c.up = c.view_direction;
  CHECK_THROWS_AS(c.normalized(), Error);
  c = front_camera();
  c.pixel_size = 0.0;
  CHECK_THROWS_AS(c.normalized(), Error);
}

TEST_CASE("project inverts pixel_center") {
  const Camera c = front_camera();
  for (int v = 0; v < c.height; v += 7) {
    for (int u = 0; u < c.width; u += 5) {
      const auto p = project_pixel(c, c.pixel_center({u, v}));
      REQUIRE(p);
      CHECK(*p == Pixel{u, v});
    }
  }
  CHECK_FALSE(project_pixel(c, Vec3(0, 5, 0)));
}

TEST_CASE("ray_box_hit against the slab intersection") {
  Box box{Vec3(0, 0, 0), Vec3(1, 2, 3), Quat::Identity()};
  auto hit = ray_box_hit(Vec3(5, 0.5, 0.5), -Vec3::UnitX(), box, SE3Pose());
  REQUIRE(hit);
  CHECK(*hit == doctest::Approx(4.0));
  CHECK_FALSE(ray_box_hit(Vec3(5, 2.5, 0), -Vec3::UnitX(), box, SE3Pose()));
  CHECK_FALSE(ray_box_hit(Vec3(5, 0, 0), Vec3::UnitX(), box, SE3Pose()));
  // A box turned 90 degrees about z swaps its x and y extents.
  Box turned{Vec3::Zero(), Vec3(1, 2, 3), Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()))};
  hit = ray_box_hit(Vec3(5, 0, 0), -Vec3::UnitX(), turned, SE3Pose());
  REQUIRE(hit);
  CHECK(*hit == doctest::Approx(3.0));
  hit = ray_box_hit(Vec3(5, 0, 0), -Vec3::UnitX(), box, SE3Pose::translation(Vec3(-1, 0, 0)));
  REQUIRE(hit);
  CHECK(*hit == doctest::Approx(5.0));
}

TEST_CASE("render depth and part ids match the analytic scene") {
  const auto obj = test::drawer_object();
  const Camera cam = front_camera();
  const Observation obs = render(obj, cam);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 o = cam.pixel_center({u, v});
      const double y = o.y();
      const double z = o.z();
      int expected = -1;
      double depth = kBackgroundDepth;
      if (std::abs(y) < 0.35 && std::abs(z - 0.7) < 0.15) {
        expected = 1;
        depth = 1.0 - 0.32;
      } else if (std::abs(y) < 0.4 && z > 0.0 && z < 1.0) {
        expected = 0;
        depth = 1.0 - 0.3;
      }
      CHECK(obs.part_id(u, v) == expected);
      if (expected >= 0) {
        CHECK(obs.depth(u, v) == doctest::Approx(depth).epsilon(1e-12));
      } else {
        CHECK(std::isinf(obs.depth(u, v)));
      }
    }
  }
  CHECK_FALSE(any(obs.mask_layer));
}

TEST_CASE("render throws when nothing is visible") {
  Camera cam = front_camera();
  cam.frame_center = Vec3(1.0, 10.0, 0.5);
  CHECK_THROWS_AS(render(test::drawer_object(), cam), Error);
}

TEST_CASE("lift_pixel and surface_normal") {
  const auto obj = test::drawer_object();
  const Observation obs = render(obj, front_camera());
  const Pixel p = test::first_pixel_of(obs, 1);
  const Vec3 x = lift_pixel(obs, p);
  CHECK(x.x() == doctest::Approx(0.32));
  CHECK((surface_normal(obj, 1, x) - Vec3::UnitX()).norm() < 1e-12);
  CHECK_THROWS_AS(surface_normal(obj, 1, Vec3(5, 5, 5)), Error);
  CHECK_THROWS_AS(lift_pixel(obs, {0, 0}), Error);
  CHECK_THROWS_AS(lift_pixel(obs, {-1, 0}), Error);
}

TEST_CASE("lifted points lie on the surface for every builtin object") {
  for (const auto& obj : builtin_suite(11, 3)) {
    const Observation obs = render(obj, default_camera(obj, 48, 0.1, -0.05));
    for (int v = 0; v < 48; v += 3) {
      for (int u = 0; u < 48; u += 3) {
        if (!obs.foreground({u, v})) continue;
        const Vec3 x = lift_pixel(obs, {u, v});
        CHECK_NOTHROW(surface_normal(obj, obs.part_id(u, v), x));
      }
    }
  }
}

TEST_CASE("interaction map marks exactly the movable parts") {
  const auto obj = test::drawer_object();
  const Observation obs = render(obj, front_camera());
  const BoolGrid map = interaction_map(obj, obs);
  CHECK(map == interaction_map(obj, front_camera()));
  for (std::size_t i = 0; i < map.size(); ++i) CHECK((map.data()[i] != 0) == (obs.part_id.data()[i] == 1));
}

TEST_CASE("overlay_mask keeps the mask inside the foreground") {
  const Observation obs = render(test::drawer_object(), front_camera());
  BoolGrid all(64, 64, 1);
  const Observation masked = overlay_mask(obs, all);
  CHECK(masked.mask_layer == obs.foreground_mask());
  CHECK(masked.depth == obs.depth);
  CHECK_THROWS_AS(overlay_mask(obs, BoolGrid(10, 10, 1)), Error);
  BoolGrid one(64, 64, 0);
  one(32, 20) = 1;
  const Observation twice = overlay_mask(overlay_mask(obs, one), BoolGrid(64, 64, 0));
  CHECK(twice.mask_layer(32, 20) == obs.foreground({32, 20}));
}

TEST_CASE("default camera frames the whole object") {
  for (const auto& obj : builtin_suite(11, 1)) {
    const Observation obs = render(obj, default_camera(obj, 64));
    for (int i = 0; i < 64; ++i) {
      CHECK(obs.part_id(i, 0) == -1);
      CHECK(obs.part_id(i, 63) == -1);
      CHECK(obs.part_id(0, i) == -1);
      CHECK(obs.part_id(63, i) == -1);
    }
    CHECK(any(interaction_map(obj, obs)));
  }
}
