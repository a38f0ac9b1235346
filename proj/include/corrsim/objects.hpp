#pragma once

// Parametric articulated objects standing in for household assets.
//
// Every object rests on z = 0 with its front facing +x. Movable fronts
// (doors, drawers, lids) are mounted so that increasing q opens them and the
// opening motion at the closed front face points along its outward normal.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "corrsim/kinematics.hpp"

namespace corrsim {

const std::vector<std::string>& object_families();

/// Draws one randomized variant of `family`; throws Config on unknown names.
ArticulatedObject make_object(const std::string& family, std::mt19937_64& rng);

/// `count` objects cycling through the families, variant dimensions drawn
/// from `seed`.
std::vector<ArticulatedObject> builtin_suite(int count, std::uint64_t seed);

/// `count` variants of a single family.
std::vector<ArticulatedObject> family_suite(const std::string& family, int count,
                                            std::uint64_t seed);

}  // namespace corrsim
