#include "corrsim/prompts.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include "corrsim/error.hpp"

namespace corrsim {

namespace {

PromptTemplates make_defaults() {
  PromptTemplates t;
  t.text = {
      {"predict",
       "{instruction} Specify the contact point and the gripper direction to {primitive} the "
       "object. Answer as: (u, v) [x, y, z]."},
      {"cot_1", "Is there a red mask in the image? Answer Yes or No."},
      {"cot_2", "Is the point ({u}, {v}) covered by the red mask? Answer Yes or No."},
      {"cot_3",
       "The previous contact point ({u}, {v}) did not move the object. Is it on an unmovable "
       "part? Answer Yes or No."},
      {"cot_4",
       "{instruction} Red regions cannot move. Specify a new contact point outside them and a "
       "gripper direction to {primitive} the object. Answer as: (u, v) [x, y, z]."},
      {"cot_5",
       "Will contacting ({new_u}, {new_v}) with gripper direction {new_bins} {primitive} the "
       "object successfully? Answer Yes or No."},
      {"rotation",
       "The contacted part moves along a {kind} joint with axis direction {axis_bins}. The "
       "contact point ({u}, {v}) stays fixed and its surface normal is {normal_bins}. Give a new "
       "gripper direction. Answer as: [x, y, z]."},
      {"mask_position",
       "For each point, is it covered by the red mask? Points: {points}. Answer Yes or No for "
       "each point, in order."},
      {"reask", "The previous answer could not be used. Reply strictly in the requested format."},
  };
  return t;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::string& PromptTemplates::get(const std::string& key) const {
  auto it = text.find(key);
  if (it == text.end()) throw Error(ErrorCode::kConfig, "missing prompt template '" + key + "'");
  return it->second;
}

const PromptTemplates& default_templates() {
  static const PromptTemplates t = make_defaults();
  return t;
}

PromptTemplates parse_templates(const std::string& content) {
  PromptTemplates t;
  t.version.clear();
  std::istringstream in(content);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (t.version.empty()) {
      if (line.rfind("version ", 0) != 0) {
        throw Error(ErrorCode::kConfig, "templates line " + std::to_string(lineno) +
                                            ": expected 'version <v>'");
      }
      t.version = trim(line.substr(8));
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::kConfig,
                  "templates line " + std::to_string(lineno) + ": expected '<key>: <text>'");
    }
    t.text[trim(line.substr(0, colon))] = trim(line.substr(colon + 1));
  }
  if (t.version.empty()) throw Error(ErrorCode::kConfig, "templates: missing version line");
  for (const char* key : {"predict", "cot_1", "cot_2", "cot_3", "cot_4", "cot_5", "rotation", "mask_position",
                          "reask"}) {
    t.get(key);
  }
  return t;
}

PromptTemplates load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_templates(ss.str());
}

std::string write_templates(const PromptTemplates& templates) {
  std::string out = "version " + templates.version + "\n";
  for (const auto& [key, value] : templates.text) out += key + ": " + value + "\n";
  return out;
}

std::string fill_template(const std::string& tmpl,
                          const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string::npos) {
        auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string format_pixel(Pixel p) {
  return "(" + std::to_string(p.u) + ", " + std::to_string(p.v) + ")";
}

std::string format_bins(const DirectionBins& b) {
  return "[" + std::to_string(b.bins[0]) + ", " + std::to_string(b.bins[1]) + ", " +
         std::to_string(b.bins[2]) + "]";
}

std::string format_action_answer(const Action& action) {
  return format_pixel(action.contact_pixel) + " " +
         format_bins(encode_direction(action.gripper_direction));
}

std::string format_yes_no(bool yes) { return yes ? "Yes" : "No"; }

std::optional<Pixel> parse_pixel(const std::string& text) {
  static const std::regex re(R"(\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\))");
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  try {
    return Pixel{std::stoi(m[1].str()), std::stoi(m[2].str())};
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
}

std::optional<DirectionBins> parse_bins(const std::string& text) {
  static const std::regex re(R"(\[\s*(\d{1,2})\s*,\s*(\d{1,2})\s*,\s*(\d{1,2})\s*\])");
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return DirectionBins{{std::stoi(m[1].str()), std::stoi(m[2].str()), std::stoi(m[3].str())}};
}

std::optional<bool> parse_yes_no(const std::string& text) {
  static const std::regex re(R"(\b(yes|no)\b)", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  const char c = m[1].str()[0];
  return c == 'y' || c == 'Y';
}

std::optional<Action> parse_action(const std::string& text, Primitive primitive) {
  const auto pixel = parse_pixel(text);
  const auto bins = parse_bins(text);
  if (!pixel || !bins) return std::nullopt;
  return Action{*pixel, decode_direction(*bins), primitive};
}

std::string build_predict_prompt(const Instruction& instruction,
                                 const PromptTemplates& templates) {
  return fill_template(templates.get("predict"),
                       {{"instruction", instruction.text},
                        {"primitive", to_string(instruction.primitive)}});
}

std::string build_position_cot(const Observation& observation_with_masks,
                               const Action& previous_action, int step,
                               const Instruction& instruction,
                               const std::optional<Action>& proposed,
                               const PromptTemplates& templates) {
  if (!any(observation_with_masks.mask_layer)) {
    throw Error(ErrorCode::kNoMasks, "position correction needs an accumulated mask");
  }
  if (step < 1 || step > 5) throw Error(ErrorCode::kInvalidParams, "CoT step must be 1..5");
  std::map<std::string, std::string> values{
      {"u", std::to_string(previous_action.contact_pixel.u)},
      {"v", std::to_string(previous_action.contact_pixel.v)},
      {"instruction", instruction.text},
      {"primitive", to_string(instruction.primitive)},
  };
  if (step == 5) {
    if (!proposed) throw Error(ErrorCode::kInvalidParams, "step 5 needs the proposed action");
    values["new_u"] = std::to_string(proposed->contact_pixel.u);
    values["new_v"] = std::to_string(proposed->contact_pixel.v);
    values["new_bins"] = format_bins(encode_direction(proposed->gripper_direction));
  }
  return fill_template(templates.get("cot_" + std::to_string(step)), values);
}

std::string build_rotation_prompt(const JointEstimate& joint_estimate, Pixel contact_pixel,
                                  const Vec3& normal_direction, const PromptTemplates& templates) {
  if (joint_estimate.kind == EstimatedKind::kNoMotion || !joint_estimate.axis) {
    throw Error(ErrorCode::kNoEstimate, "rotation prompt needs a joint estimate with motion");
  }
  return fill_template(templates.get("rotation"),
                       {{"kind", to_string(joint_estimate.kind)},
                        {"axis_bins", format_bins(encode_direction(*joint_estimate.axis))},
                        {"u", std::to_string(contact_pixel.u)},
                        {"v", std::to_string(contact_pixel.v)},
                        {"normal_bins", format_bins(encode_direction(normal_direction))}});
}

}  // namespace corrsim
