#include "corrsim/serialize.hpp"

#include <fstream>
#include <sstream>

#include "corrsim/error.hpp"

namespace corrsim {

namespace {

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string(what) + ": " + e.what());
  }
}

}  // namespace

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json to_json(const Quat& q) { return Json::array({q.x(), q.y(), q.z(), q.w()}); }

Json to_json(const SE3Pose& pose) {
  return {{"p", to_json(pose.position())}, {"q", to_json(pose.orientation())}};
}

Json to_json(Pixel p) { return Json::array({p.u, p.v}); }

Json to_json(const Camera& c) {
  return {{"view", to_json(c.view_direction)}, {"up", to_json(c.up)},
          {"center", to_json(c.frame_center)}, {"width", c.width},
          {"height", c.height},                 {"pixel_size", c.pixel_size}};
}

Json to_json(const Action& a) {
  return {{"pixel", to_json(a.contact_pixel)},
          {"direction", to_json(a.gripper_direction)},
          {"primitive", to_string(a.primitive)}};
}

Json to_json(const Trajectory& t) {
  Json poses = Json::array();
  for (const auto& p : t.poses) poses.push_back(to_json(p));
  return {{"poses", poses},
          {"part", t.contacted_part ? Json(*t.contacted_part) : Json()},
          {"q_before", t.q_before},
          {"q_after", t.q_after}};
}

Json to_json(const SuccessReport& r) {
  return {{"success", r.success},
          {"delta_q", r.delta_q},
          {"range_fraction", r.range_fraction},
          {"direction_dot", r.direction_dot}};
}

Json to_json(const BoolGrid& mask) {
  Json runs = Json::array();
  std::uint8_t current = 0;
  std::size_t run = 0;
  for (auto b : mask.data()) {
    const std::uint8_t bit = b ? 1 : 0;
    if (bit != current) {
      runs.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  runs.push_back(run);
  return {{"width", mask.width()}, {"height", mask.height()}, {"runs", runs}};
}

Json to_json(const JointEstimate& e) {
  return {{"kind", to_string(e.kind)},
          {"axis", e.axis ? to_json(*e.axis) : Json()},
          {"confidence", e.confidence}};
}

Json to_json(const FeedbackRecord& f) {
  Json masks = Json::array();
  for (const auto& m : f.masks) {
    masks.push_back({{"pixels", to_json(m.pixels)}, {"source", to_json(m.source_pixel)}});
  }
  return {{"joint_estimate", to_json(f.joint_estimate)},
          {"masks", masks},
          {"trajectory_refs", f.trajectory_refs}};
}

Json to_json(const TranscriptEntry& e) {
  return {{"task", to_string(e.task)},
          {"step", e.step},
          {"prompt", e.prompt},
          {"response", e.response},
          {"reask", e.reask}};
}

Json to_json(const AttemptRecord& a) {
  Json prompts = Json::array();
  for (const auto& p : a.prompts) prompts.push_back(to_json(p));
  return {{"index", a.index},
          {"action", to_json(a.action)},
          {"trajectory", to_json(a.trajectory)},
          {"report", to_json(a.report)},
          {"cause", a.cause ? Json(to_string(*a.cause)) : Json()},
          {"correction_kind", to_string(a.correction_kind)},
          {"prompts", prompts},
          {"probe", a.probe ? to_json(*a.probe) : Json()}};
}

Json to_json(const SessionLog& log) {
  Json attempts = Json::array();
  for (const auto& a : log.attempts) attempts.push_back(to_json(a));
  Json unexecuted = Json::array();
  for (const auto& p : log.unexecuted_prompts) unexecuted.push_back(to_json(p));
  return {{"sample_id", log.sample_id},
          {"seed", log.seed},
          {"object_asset", log.object_asset},
          {"camera", to_json(log.camera)},
          {"instruction",
           {{"text", log.instruction.text}, {"primitive", to_string(log.instruction.primitive)}}},
          {"attempts", attempts},
          {"feedback", to_json(log.feedback)},
          {"final_success", log.final_success},
          {"corrections_used", log.corrections_used},
          {"error", log.error ? Json(*log.error) : Json()},
          {"stop_reason", log.stop_reason},
          {"unexecuted_prompts", unexecuted}};
}

Json to_json(const DirectionBins& b) { return Json::array({b.bins[0], b.bins[1], b.bins[2]}); }

// ---------------------------------------------------------------------------

Vec3 vec3_from_json(const Json& j) {
  return guarded("vec3", [&] {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kParseFailure, "vec3: need 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  });
}

Quat quat_from_json(const Json& j) {
  return guarded("quat", [&] {
    if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::kParseFailure, "quat: need 4 numbers");
    return Quat(j[3].get<double>(), j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  });
}

SE3Pose pose_from_json(const Json& j) {
  return guarded("pose", [&] {
    return SE3Pose::from_raw(vec3_from_json(j.at("p")), quat_from_json(j.at("q")));
  });
}

Pixel pixel_from_json(const Json& j) {
  return guarded("pixel", [&] {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::kParseFailure, "pixel: need 2 ints");
    return Pixel{j[0].get<int>(), j[1].get<int>()};
  });
}

Camera camera_from_json(const Json& j) {
  return guarded("camera", [&] {
    Camera c;
    c.view_direction = vec3_from_json(j.at("view"));
    c.up = vec3_from_json(j.at("up"));
    c.frame_center = vec3_from_json(j.at("center"));
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.pixel_size = j.at("pixel_size").get<double>();
    return c;
  });
}

Action action_from_json(const Json& j) {
  return guarded("action", [&] {
    return Action{pixel_from_json(j.at("pixel")), vec3_from_json(j.at("direction")),
                  primitive_from_string(j.at("primitive").get<std::string>())};
  });
}

Trajectory trajectory_from_json(const Json& j) {
  return guarded("trajectory", [&] {
    Trajectory t;
    for (const auto& p : j.at("poses")) t.poses.push_back(pose_from_json(p));
    if (!j.at("part").is_null()) t.contacted_part = j.at("part").get<int>();
    t.q_before = j.at("q_before").get<double>();
    t.q_after = j.at("q_after").get<double>();
    return t;
  });
}

SuccessReport report_from_json(const Json& j) {
  return guarded("report", [&] {
    return SuccessReport{j.at("success").get<bool>(), j.at("delta_q").get<double>(),
                         j.at("range_fraction").get<double>(),
                         j.at("direction_dot").get<double>()};
  });
}

BoolGrid mask_from_json(const Json& j) {
  return guarded("mask", [&] {
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    if (w < 0 || h < 0) throw Error(ErrorCode::kParseFailure, "mask: negative size");
    BoolGrid g(w, h, 0);
    std::size_t pos = 0;
    std::uint8_t bit = 0;
    for (const auto& r : j.at("runs")) {
      const auto n = r.get<std::size_t>();
      if (pos + n > g.size()) throw Error(ErrorCode::kParseFailure, "mask: runs exceed size");
      std::fill_n(g.data().begin() + static_cast<std::ptrdiff_t>(pos), n, bit);
      pos += n;
      bit ^= 1;
    }
    if (pos != g.size()) throw Error(ErrorCode::kParseFailure, "mask: runs do not cover image");
    return g;
  });
}

JointEstimate estimate_from_json(const Json& j) {
  return guarded("joint_estimate", [&] {
    JointEstimate e;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "prismatic") {
      e.kind = EstimatedKind::kPrismatic;
    } else if (kind == "revolute") {
      e.kind = EstimatedKind::kRevolute;
    } else if (kind == "no_motion") {
      e.kind = EstimatedKind::kNoMotion;
    } else {
      throw Error(ErrorCode::kParseFailure, "unknown joint kind '" + kind + "'");
    }
    if (!j.at("axis").is_null()) e.axis = vec3_from_json(j.at("axis"));
    e.confidence = j.at("confidence").get<int>();
    return e;
  });
}

FeedbackRecord feedback_from_json(const Json& j) {
  return guarded("feedback", [&] {
    FeedbackRecord f;
    f.joint_estimate = estimate_from_json(j.at("joint_estimate"));
    for (const auto& m : j.at("masks")) {
      f.masks.push_back({mask_from_json(m.at("pixels")), pixel_from_json(m.at("source"))});
    }
    f.trajectory_refs = j.at("trajectory_refs").get<std::vector<int>>();
    return f;
  });
}

TranscriptEntry transcript_from_json(const Json& j) {
  return guarded("transcript", [&] {
    return TranscriptEntry{task_kind_from_string(j.at("task").get<std::string>()),
                           j.at("step").get<int>(), j.at("prompt").get<std::string>(),
                           j.at("response").get<std::string>(), j.at("reask").get<bool>()};
  });
}

AttemptRecord attempt_from_json(const Json& j) {
  return guarded("attempt", [&] {
    AttemptRecord a;
    a.index = j.at("index").get<int>();
    a.action = action_from_json(j.at("action"));
    a.trajectory = trajectory_from_json(j.at("trajectory"));
    a.report = report_from_json(j.at("report"));
    if (!j.at("cause").is_null()) a.cause = failure_cause_from_string(j.at("cause").get<std::string>());
    a.correction_kind = correction_kind_from_string(j.at("correction_kind").get<std::string>());
    for (const auto& p : j.at("prompts")) a.prompts.push_back(transcript_from_json(p));
    if (!j.at("probe").is_null()) a.probe = trajectory_from_json(j.at("probe"));
    return a;
  });
}

SessionLog session_from_json(const Json& j) {
  return guarded("session", [&] {
    SessionLog log;
    log.sample_id = j.at("sample_id").get<std::string>();
    log.seed = j.at("seed").get<std::uint64_t>();
    log.object_asset = j.at("object_asset").get<std::string>();
    log.camera = camera_from_json(j.at("camera"));
    log.instruction.text = j.at("instruction").at("text").get<std::string>();
    log.instruction.primitive =
        primitive_from_string(j.at("instruction").at("primitive").get<std::string>());
    for (const auto& a : j.at("attempts")) log.attempts.push_back(attempt_from_json(a));
    log.feedback = feedback_from_json(j.at("feedback"));
    log.final_success = j.at("final_success").get<bool>();
    log.corrections_used = j.at("corrections_used").get<int>();
    if (!j.at("error").is_null()) log.error = j.at("error").get<std::string>();
    log.stop_reason = j.at("stop_reason").get<std::string>();
    for (const auto& p : j.at("unexecuted_prompts")) {
      log.unexecuted_prompts.push_back(transcript_from_json(p));
    }
    return log;
  });
}

DirectionBins bins_from_json(const Json& j) {
  return guarded("bins", [&] {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kParseFailure, "bins: need 3 ints");
    return DirectionBins{{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()}};
  });
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + "\n";
  write_text(path, out);
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<Json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseFailure,
                  path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace corrsim
