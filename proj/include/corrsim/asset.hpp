#pragma once

// Object asset files.
//
// Line-oriented text, one statement per line, `#` starts a comment:
//
//   articulated-object 1
//   name cabinet_door
//   part 0 static base
//   box 0 0 0.5  0.3 0.4 0.5  0 0 0 1
//   part 1 revolute door origin 0.31 -0.4 0 axis 0 0 -1 range 0 1.5708 q 0
//   box 0.31 0 0.5  0.01 0.4 0.5  0 0 0 1
//   end
//
// `box` lines are `center(3) half_extents(3) quaternion(x y z w)` and attach
// to the most recent `part`. `q` is optional and defaults to the lower limit.
// Parse and validation failures raise Error(kAssetParse) prefixed with
// "line N:".

#include <filesystem>
#include <string>

#include "corrsim/kinematics.hpp"

namespace corrsim {

inline constexpr int kAssetSchemaVersion = 1;

ArticulatedObject parse_asset(const std::string& text);
ArticulatedObject load_asset(const std::filesystem::path& path);

/// Writes with round-trip precision; parse_asset(write_asset(o)) == o.
std::string write_asset(const ArticulatedObject& object);
void save_asset(const ArticulatedObject& object, const std::filesystem::path& path);

}  // namespace corrsim
