#pragma once

// JSON encoding of simulator records. Doubles are written in shortest
// round-trip form, so decode(encode(x)) == x bit for bit.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "corrsim/correction.hpp"

namespace corrsim {

using Json = nlohmann::json;

Json to_json(const Vec3& v);
Json to_json(const Quat& q);  ///< [x, y, z, w]
Json to_json(const SE3Pose& pose);
Json to_json(Pixel p);
Json to_json(const Camera& camera);
Json to_json(const Action& action);
Json to_json(const Trajectory& trajectory);
Json to_json(const SuccessReport& report);
Json to_json(const BoolGrid& mask);  ///< run-length encoded, first run is zeros
Json to_json(const JointEstimate& estimate);
Json to_json(const FeedbackRecord& feedback);
Json to_json(const TranscriptEntry& entry);
Json to_json(const AttemptRecord& attempt);
Json to_json(const SessionLog& log);
Json to_json(const DirectionBins& bins);

Vec3 vec3_from_json(const Json& j);
Quat quat_from_json(const Json& j);
SE3Pose pose_from_json(const Json& j);
Pixel pixel_from_json(const Json& j);
Camera camera_from_json(const Json& j);
Action action_from_json(const Json& j);
Trajectory trajectory_from_json(const Json& j);
SuccessReport report_from_json(const Json& j);
BoolGrid mask_from_json(const Json& j);
JointEstimate estimate_from_json(const Json& j);
FeedbackRecord feedback_from_json(const Json& j);
TranscriptEntry transcript_from_json(const Json& j);
AttemptRecord attempt_from_json(const Json& j);
SessionLog session_from_json(const Json& j);
DirectionBins bins_from_json(const Json& j);

/// One JSON document per line. Throws Io / ParseFailure.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace corrsim
