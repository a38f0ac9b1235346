#include <filesystem>

#include "corrsim/error.hpp"
#include "corrsim/prompts.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrsim;

#ifndef CORRSIM_SOURCE_DIR
#define CORRSIM_SOURCE_DIR "."
#endif

TEST_CASE("pixel grammar") {
  CHECK(parse_pixel("(12, 34)") == Pixel{12, 34});
  CHECK(parse_pixel("point is ( -3 ,7 ) then (1, 2)") == Pixel{-3, 7});
  CHECK(parse_pixel("(1 2)") == std::nullopt);
  CHECK(parse_pixel("12, 34") == std::nullopt);
  CHECK(parse_pixel("(99999999999999, 1)") == std::nullopt);
}

TEST_CASE("bin grammar") {
  CHECK(parse_bins("[1, 2, 3]")->bins == std::array<int, 3>{1, 2, 3});
  CHECK(parse_bins("x [ 99,0 , 50 ] y [1,1,1]")->bins == std::array<int, 3>{99, 0, 50});
  CHECK(parse_bins("[100, 2, 3]") == std::nullopt);
  CHECK(parse_bins("[1, 2]") == std::nullopt);
}

TEST_CASE("yes/no grammar") {
  CHECK(parse_yes_no("Yes.") == true);
  CHECK(parse_yes_no("I think NO") == false);
  CHECK(parse_yes_no("no, yes") == false);
  CHECK(parse_yes_no("yesterday nobody") == std::nullopt);
  CHECK(parse_yes_no("") == std::nullopt);
}

TEST_CASE("action answers round trip") {
  const Action a{{10, 20}, Vec3::UnitX(), Primitive::kPush};
  CHECK(format_action_answer(a) == "(10, 20) [99, 50, 50]");
  const auto back = parse_action(format_action_answer(a), Primitive::kPush);
  REQUIRE(back);
  CHECK(back->contact_pixel == a.contact_pixel);
  CHECK(encode_direction(back->gripper_direction) == encode_direction(a.gripper_direction));
  CHECK(back->primitive == Primitive::kPush);
  CHECK(parse_action("(1, 2)", Primitive::kPull) == std::nullopt);
  CHECK(parse_action("[1, 2, 3]", Primitive::kPull) == std::nullopt);
}

TEST_CASE("prompt builders") {
  const Instruction ins{"Open the drawer.", Primitive::kPull};
  CHECK(build_predict_prompt(ins) ==
        "Open the drawer. Specify the contact point and the gripper direction to pull the object. "
        "Answer as: (u, v) [x, y, z].");

  const auto obj = test::drawer_object();
  const Observation clean = render(obj, default_camera(obj, 32));
  const Action prev{{5, 6}, Vec3::UnitX(), Primitive::kPull};
  CHECK_THROWS_AS(build_position_cot(clean, prev, 1, ins), Error);

  BoolGrid m(32, 32, 0);
  const Pixel body = test::first_pixel_of(clean, 0);
  m[body] = 1;
  const Observation masked = overlay_mask(clean, m);
  CHECK(build_position_cot(masked, prev, 1, ins) == "Is there a red mask in the image? Answer Yes or No.");
  CHECK(build_position_cot(masked, prev, 2, ins) ==
        "Is the point (5, 6) covered by the red mask? Answer Yes or No.");
  CHECK(build_position_cot(masked, prev, 3, ins).find("(5, 6) did not move") != std::string::npos);
  CHECK(build_position_cot(masked, prev, 4, ins).rfind("Open the drawer. Red regions", 0) == 0);
  CHECK_THROWS_AS(build_position_cot(masked, prev, 5, ins), Error);
  const Action proposed{{7, 8}, Vec3(0, 0, -1), Primitive::kPull};
  CHECK(build_position_cot(masked, prev, 5, ins, proposed) ==
        "Will contacting (7, 8) with gripper direction [50, 50, 0] pull the object successfully? "
        "Answer Yes or No.");
  CHECK_THROWS_AS(build_position_cot(masked, prev, 6, ins), Error);

  JointEstimate est{EstimatedKind::kRevolute, Vec3::UnitZ(), 2};
  CHECK(build_rotation_prompt(est, {3, 4}, Vec3::UnitX()) ==
        "The contacted part moves along a revolute joint with axis direction [50, 50, 99]. The "
        "contact point (3, 4) stays fixed and its surface normal is [99, 50, 50]. Give a new "
        "gripper direction. Answer as: [x, y, z].");
  CHECK_THROWS_AS(build_rotation_prompt(JointEstimate{}, {3, 4}, Vec3::UnitX()), Error);
}

TEST_CASE("fill_template keeps unknown placeholders") {
  CHECK(fill_template("{a} and {b} {", {{"a", "x"}}) == "x and {b} {");
}

TEST_CASE("shipped template file equals the built-in templates") {
  const auto path = std::filesystem::path(CORRSIM_SOURCE_DIR) / "data" / "prompt_templates_v1.txt";
  const PromptTemplates t = load_templates(path);
  CHECK(t.version == default_templates().version);
  CHECK(t.text == default_templates().text);
}

TEST_CASE("template parsing") {
  const PromptTemplates t = parse_templates(write_templates(default_templates()));
  CHECK(t.text == default_templates().text);
  CHECK_THROWS_AS(parse_templates("predict: x\n"), Error);
  CHECK_THROWS_AS(parse_templates("version v1\npredict: x\n"), Error);
  CHECK_THROWS_AS(parse_templates("version v1\nno colon here\n"), Error);
  CHECK_THROWS_AS(load_templates("/nonexistent/templates.txt"), Error);
}
