#pragma once

// Fixtures shared by the unit tests.

#include <functional>
#include <random>
#include <string>

#include "corrsim/asset.hpp"
#include "corrsim/objects.hpp"
#include "corrsim/policy.hpp"
#include "corrsim/scene.hpp"

namespace corrsim::test {

/// A 0.6 x 0.8 x 1.0 cabinet body with a drawer front sliding along +x.
inline ArticulatedObject drawer_object() {
  return parse_asset(R"(articulated-object 1
name test_drawer
part 0 static body
box 0 0 0.5  0.3 0.4 0.5  0 0 0 1
part 1 prismatic drawer origin 0 0 0 axis 1 0 0 range 0 0.3
box 0.31 0 0.7  0.01 0.35 0.15  0 0 0 1
end
)");
}

/// Cabinet with a door hinged on its left edge (y = -0.4), opening toward +x.
inline ArticulatedObject door_object() {
  return parse_asset(R"(articulated-object 1
name test_door
part 0 static body
box 0 0 0.5  0.3 0.4 0.5  0 0 0 1
part 1 revolute door origin 0.31 -0.4 0 axis 0 0 -1 range 0 1.5707963267948966
box 0.31 0 0.5  0.01 0.4 0.5  0 0 0 1
end
)");
}

/// Static box only.
inline ArticulatedObject static_object() {
  return parse_asset(R"(articulated-object 1
name test_block
part 0 static block
box 0 0 0.5  0.3 0.4 0.5  0 0 0 1
end
)");
}

/// Answers through a callback; counts calls.
class ScriptedPolicy : public Policy {
 public:
  using Fn = std::function<std::string(const PolicyRequest&, int call)>;
  explicit ScriptedPolicy(Fn fn) : fn_(std::move(fn)) {}

  std::string name() const override { return "scripted"; }
  void begin_sample(const SampleContext& context) override {
    if (context.object != nullptr) object = *context.object;
    camera = context.camera;
  }
  std::string respond(const PolicyRequest& request) override { return fn_(request, calls++); }

  ArticulatedObject object;
  Camera camera;
  int calls = 0;

 private:
  Fn fn_;
};

/// First foreground pixel of `part_id` in scan order, or (-1, -1).
inline Pixel first_pixel_of(const Observation& obs, int part_id) {
  for (int v = 0; v < obs.part_id.height(); ++v) {
    for (int u = 0; u < obs.part_id.width(); ++u) {
      if (obs.part_id(u, v) == part_id) return {u, v};
    }
  }
  return {-1, -1};
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

}  // namespace corrsim::test
