#include "corrsim/objects.hpp"

#include <numbers>

#include "corrsim/error.hpp"
#include "corrsim/rng.hpp"

namespace corrsim {

namespace {

constexpr double kPanel = 0.015;  // door / drawer-front thickness

// Axis-aligned box from min/max corners.
Box aabb(const Vec3& lo, const Vec3& hi) {
  Box b;
  b.center = 0.5 * (lo + hi);
  b.half_extents = 0.5 * (hi - lo);
  return b;
}

class Builder {
 public:
  int add_static(std::string name, std::vector<Box> boxes) {
    Part p;
    p.id = next_id_++;
    p.movable = false;
    p.geometry = std::move(boxes);
    p.name = std::move(name);
    parts_.push_back(std::move(p));
    return parts_.back().id;
  }

  int add_joint(std::string name, Joint joint, std::vector<Box> boxes) {
    Part p;
    p.id = next_id_++;
    p.movable = true;
    p.joint = joint;
    p.geometry = std::move(boxes);
    p.name = std::move(name);
    parts_.push_back(std::move(p));
    return parts_.back().id;
  }

  ArticulatedObject build(std::string name) { return ArticulatedObject(std::move(parts_), {}, std::move(name)); }

 private:
  int next_id_ = 0;
  std::vector<Part> parts_;
};

struct Body {
  double depth, width, height;
  double front() const { return 0.5 * depth; }
};

Body random_body(std::mt19937_64& rng, double d_lo, double d_hi, double w_lo, double w_hi,
                 double h_lo, double h_hi) {
  return {uniform(rng, d_lo, d_hi), uniform(rng, w_lo, w_hi), uniform(rng, h_lo, h_hi)};
}

Box body_box(const Body& b, double z0 = 0.0) {
  return aabb({-0.5 * b.depth, -0.5 * b.width, z0}, {0.5 * b.depth, 0.5 * b.width, z0 + b.height});
}

// Door panel on the front face spanning [y0, y1] x [z0, z1], hinged on its
// left (y0) or right (y1) front edge.
Joint door_hinge(const Body& b, double y0, double y1, bool hinge_left, double max_angle) {
  Joint j;
  j.kind = JointKind::kRevolute;
  j.origin = Vec3(b.front() + kPanel, hinge_left ? y0 : y1, 0.0);
  j.axis = hinge_left ? Vec3(-Vec3::UnitZ()) : Vec3(Vec3::UnitZ());
  j.q_lo = 0.0;
  j.q_hi = max_angle;
  return j;
}

Box front_panel(const Body& b, double y0, double y1, double z0, double z1) {
  return aabb({b.front(), y0, z0}, {b.front() + kPanel, y1, z1});
}

Joint slide(const Vec3& axis, double travel) {
  Joint j;
  j.kind = JointKind::kPrismatic;
  j.axis = axis;
  j.q_lo = 0.0;
  j.q_hi = travel;
  return j;
}

void add_drawer(Builder& builder, const Body& b, double y0, double y1, double z0, double z1,
                const std::string& name) {
  const double inner_depth = 0.8 * b.depth;
  std::vector<Box> boxes{front_panel(b, y0, y1, z0, z1),
                         aabb({b.front() - inner_depth, y0 + 0.01, z0 + 0.01},
                              {b.front(), y1 - 0.01, z1 - 0.02})};
  builder.add_joint(name, slide(Vec3::UnitX(), 0.75 * inner_depth), std::move(boxes));
}

ArticulatedObject drawer_cabinet(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.35, 0.5, 0.4, 0.6, 0.45, 0.7);
  Builder builder;
  builder.add_static("body", {body_box(b)});
  const double m = uniform(rng, 0.03, 0.06);
  add_drawer(builder, b, -0.5 * b.width + m, 0.5 * b.width - m, 0.55 * b.height,
             b.height - m, "drawer");
  return builder.build("drawer_cabinet");
}

ArticulatedObject door_cabinet(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.35, 0.5, 0.4, 0.6, 0.5, 0.8);
  Builder builder;
  builder.add_static("body", {body_box(b)});
  const double m = uniform(rng, 0.03, 0.06);
  const bool left = bernoulli(rng, 0.5);
  const double y0 = -0.5 * b.width + m;
  const double y1 = 0.5 * b.width - m;
  builder.add_joint("door", door_hinge(b, y0, y1, left, 0.5 * std::numbers::pi),
                    {front_panel(b, y0, y1, m, b.height - m)});
  return builder.build("door_cabinet");
}

ArticulatedObject double_door_cabinet(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.35, 0.5, 0.6, 0.9, 0.6, 0.9);
  Builder builder;
  builder.add_static("body", {body_box(b)});
  const double m = uniform(rng, 0.03, 0.05);
  const double gap = 0.01;
  const double z0 = m;
  const double z1 = b.height - m;
  builder.add_joint("left_door",
                    door_hinge(b, -0.5 * b.width + m, -gap, true, 0.5 * std::numbers::pi),
                    {front_panel(b, -0.5 * b.width + m, -gap, z0, z1)});
  builder.add_joint("right_door",
                    door_hinge(b, gap, 0.5 * b.width - m, false, 0.5 * std::numbers::pi),
                    {front_panel(b, gap, 0.5 * b.width - m, z0, z1)});
  return builder.build("double_door_cabinet");
}

ArticulatedObject dresser(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.35, 0.5, 0.5, 0.7, 0.6, 0.9);
  Builder builder;
  builder.add_static("body", {body_box(b)});
  const int drawers = bernoulli(rng, 0.5) ? 2 : 3;
  const double m = 0.03;
  const double pitch = (b.height - m) / drawers;
  for (int i = 0; i < drawers; ++i) {
    const double z0 = m + i * pitch;
    add_drawer(builder, b, -0.5 * b.width + m, 0.5 * b.width - m, z0, z0 + pitch - m,
               "drawer_" + std::to_string(i));
  }
  return builder.build("dresser");
}

ArticulatedObject microwave(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.3, 0.4, 0.45, 0.6, 0.28, 0.36);
  Builder builder;
  const double split = 0.5 * b.width - uniform(rng, 0.1, 0.15);
  const double m = 0.02;
  builder.add_static("body", {body_box(b)});
  builder.add_static("control_panel", {front_panel(b, split + 0.005, 0.5 * b.width - m, m,
                                                   b.height - m)});
  builder.add_joint("door", door_hinge(b, -0.5 * b.width + m, split, true, 0.5 * std::numbers::pi),
                    {front_panel(b, -0.5 * b.width + m, split, m, b.height - m)});
  return builder.build("microwave");
}

ArticulatedObject refrigerator(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.5, 0.65, 0.55, 0.75, 1.2, 1.6);
  Builder builder;
  builder.add_static("body", {body_box(b)});
  const double m = 0.02;
  const double split = b.height * uniform(rng, 0.62, 0.7);
  const bool left = bernoulli(rng, 0.5);
  const double y0 = -0.5 * b.width + m;
  const double y1 = 0.5 * b.width - m;
  builder.add_joint("lower_door", door_hinge(b, y0, y1, left, 0.6 * std::numbers::pi),
                    {front_panel(b, y0, y1, m, split - 0.01)});
  builder.add_joint("upper_door", door_hinge(b, y0, y1, left, 0.6 * std::numbers::pi),
                    {front_panel(b, y0, y1, split + 0.01, b.height - m)});
  return builder.build("refrigerator");
}

// Lid hinged along the back top edge; opening lifts the front edge upward.
ArticulatedObject hinged_lid(std::mt19937_64& rng, const std::string& name, const Body& b,
                             double lid_thickness) {
  Builder builder;
  builder.add_static("body", {body_box(b)});
  Joint j;
  j.kind = JointKind::kRevolute;
  j.origin = Vec3(-0.5 * b.depth, 0.0, b.height + lid_thickness);
  j.axis = -Vec3::UnitY();
  j.q_lo = 0.0;
  j.q_hi = uniform(rng, 0.45, 0.6) * std::numbers::pi;
  builder.add_joint("lid", j,
                    {aabb({-0.5 * b.depth, -0.5 * b.width, b.height},
                          {0.5 * b.depth, 0.5 * b.width, b.height + lid_thickness})});
  return builder.build(name);
}

ArticulatedObject trash_can(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.25, 0.35, 0.25, 0.35, 0.4, 0.6);
  return hinged_lid(rng, "trash_can", b, 0.03);
}

ArticulatedObject laptop(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.22, 0.28, 0.3, 0.38, 0.015, 0.025);
  return hinged_lid(rng, "laptop", b, 0.012);
}

ArticulatedObject pot(std::mt19937_64& rng) {
  const Body b = random_body(rng, 0.25, 0.35, 0.25, 0.35, 0.15, 0.25);
  Builder builder;
  builder.add_static("body", {body_box(b)});
  const double knob = 0.03;
  builder.add_joint("lid", slide(Vec3::UnitZ(), uniform(rng, 0.15, 0.25)),
                    {aabb({-0.5 * b.depth, -0.5 * b.width, b.height},
                          {0.5 * b.depth, 0.5 * b.width, b.height + 0.02}),
                     aabb({-knob, -knob, b.height + 0.02}, {knob, knob, b.height + 0.05})});
  return builder.build("pot");
}

ArticulatedObject faucet(std::mt19937_64& rng) {
  const double base_h = uniform(rng, 0.12, 0.2);
  const double base_r = uniform(rng, 0.025, 0.04);
  const double lever = uniform(rng, 0.12, 0.18);
  Builder builder;
  builder.add_static("base", {aabb({-0.15, -0.15, 0.0}, {0.15, 0.15, 0.02}),
                              aabb({-base_r, -base_r, 0.02}, {base_r, base_r, 0.02 + base_h})});
  Joint j;
  j.kind = JointKind::kRevolute;
  j.origin = Vec3(0.0, 0.0, 0.0);
  j.axis = Vec3::UnitZ();
  j.q_lo = 0.0;
  j.q_hi = uniform(rng, 0.8, 1.2);
  const double z = 0.02 + base_h;
  builder.add_joint("lever", j, {aabb({-base_r, -0.02, z}, {lever, 0.02, z + 0.03})});
  return builder.build("faucet");
}

ArticulatedObject slider_switch(std::mt19937_64& rng) {
  const double w = uniform(rng, 0.2, 0.3);
  const double h = uniform(rng, 0.12, 0.18);
  Builder builder;
  builder.add_static("plate", {aabb({-0.02, -0.5 * w, 0.0}, {0.0, 0.5 * w, h})});
  const double knob_w = 0.04;
  builder.add_joint("knob", slide(Vec3::UnitY(), w - knob_w - 0.02),
                    {aabb({0.0, -0.5 * w + 0.01, 0.3 * h},
                          {0.03, -0.5 * w + 0.01 + knob_w, 0.7 * h})});
  return builder.build("slider_switch");
}

using Factory = ArticulatedObject (*)(std::mt19937_64&);

const std::vector<std::pair<std::string, Factory>>& factories() {
  static const std::vector<std::pair<std::string, Factory>> table{
      {"drawer_cabinet", drawer_cabinet}, {"door_cabinet", door_cabinet},
      {"microwave", microwave},           {"refrigerator", refrigerator},
      {"dresser", dresser},               {"double_door_cabinet", double_door_cabinet},
      {"trash_can", trash_can},           {"pot", pot},
      {"laptop", laptop},                 {"faucet", faucet},
      {"slider_switch", slider_switch},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& object_families() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : factories()) out.push_back(name);
    return out;
  }();
  return names;
}

ArticulatedObject make_object(const std::string& family, std::mt19937_64& rng) {
  for (const auto& [name, factory] : factories()) {
    if (name == family) return factory(rng);
  }
  throw Error(ErrorCode::kConfig, "unknown object family '" + family + "'");
}

std::vector<ArticulatedObject> builtin_suite(int count, std::uint64_t seed) {
  std::vector<ArticulatedObject> out;
  const auto& families = object_families();
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(make_object(families[static_cast<std::size_t>(i) % families.size()], rng));
  }
  return out;
}

std::vector<ArticulatedObject> family_suite(const std::string& family, int count,
                                            std::uint64_t seed) {
  std::vector<ArticulatedObject> out;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(make_object(family, rng));
  }
  return out;
}

}  // namespace corrsim
