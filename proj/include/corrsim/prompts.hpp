#pragma once

// Prompt templates and the answer grammar.
//
// Answer grammar (ECMAScript regex, first match wins, whitespace-insensitive):
//   pixel   \(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)
//   bins    \[\s*(\d{1,2})\s*,\s*(\d{1,2})\s*,\s*(\d{1,2})\s*\]
//   yes/no  \b(yes|no)\b, case-insensitive
// An action answer needs both a pixel and a bin triple; canonical form is
// "(u, v) [b1, b2, b3]".

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "corrsim/fie.hpp"
#include "corrsim/interaction.hpp"
#include "corrsim/policy.hpp"

namespace corrsim {

inline constexpr const char* kPromptTemplateVersion = "v1";

/// Keys: predict, cot_1 .. cot_5, rotation, mask_position, reask.
struct PromptTemplates {
  std::string version = kPromptTemplateVersion;
  std::map<std::string, std::string> text;

  const std::string& get(const std::string& key) const;
};

const PromptTemplates& default_templates();

/// File format: "version <v>" on the first line, then "<key>: <text>" lines;
/// blank lines and lines starting with '#' are ignored.
PromptTemplates parse_templates(const std::string& content);
PromptTemplates load_templates(const std::filesystem::path& path);
std::string write_templates(const PromptTemplates& templates);

/// Replaces every "{name}" with its value; unknown placeholders are kept.
std::string fill_template(const std::string& tmpl, const std::map<std::string, std::string>& values);

std::string format_pixel(Pixel p);
std::string format_bins(const DirectionBins& bins);
std::string format_action_answer(const Action& action);
std::string format_yes_no(bool yes);

std::optional<Pixel> parse_pixel(const std::string& text);
std::optional<DirectionBins> parse_bins(const std::string& text);
std::optional<bool> parse_yes_no(const std::string& text);
/// Pixel plus bins, decoded into a unit gripper direction.
std::optional<Action> parse_action(const std::string& text, Primitive primitive);

std::string build_predict_prompt(const Instruction& instruction,
                                 const PromptTemplates& templates = default_templates());

/// Step 1..5 of the position-correction chain. `proposed` is the step-4
/// answer, required for step 5. Throws NoMasks without accumulated masks and
/// InvalidParams on a bad step.
std::string build_position_cot(const Observation& observation_with_masks,
                               const Action& previous_action, int step,
                               const Instruction& instruction,
                               const std::optional<Action>& proposed = std::nullopt,
                               const PromptTemplates& templates = default_templates());

/// Throws NoEstimate when the estimate carries no motion.
std::string build_rotation_prompt(const JointEstimate& joint_estimate, Pixel contact_pixel,
                                  const Vec3& normal_direction,
                                  const PromptTemplates& templates = default_templates());

}  // namespace corrsim
