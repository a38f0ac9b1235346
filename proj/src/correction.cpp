#include "corrsim/correction.hpp"

#include <functional>

#include "corrsim/asset.hpp"
#include "corrsim/error.hpp"
#include "corrsim/rng.hpp"

namespace corrsim {

std::string to_string(FailureCause cause) {
  switch (cause) {
    case FailureCause::kMoved: return "moved";
    case FailureCause::kNoMotionProbeMoved: return "no_motion_probe_moved";
    case FailureCause::kNoMotionContactInvalid: return "no_motion_contact_invalid";
  }
  return "moved";
}

std::string to_string(CorrectionKind kind) {
  switch (kind) {
    case CorrectionKind::kNone: return "none";
    case CorrectionKind::kPosition: return "position";
    case CorrectionKind::kRotation: return "rotation";
  }
  return "none";
}

FailureCause failure_cause_from_string(const std::string& s) {
  if (s == "moved") return FailureCause::kMoved;
  if (s == "no_motion_probe_moved") return FailureCause::kNoMotionProbeMoved;
  if (s == "no_motion_contact_invalid") return FailureCause::kNoMotionContactInvalid;
  throw Error(ErrorCode::kParseFailure, "unknown failure cause '" + s + "'");
}

CorrectionKind correction_kind_from_string(const std::string& s) {
  if (s == "none") return CorrectionKind::kNone;
  if (s == "position") return CorrectionKind::kPosition;
  if (s == "rotation") return CorrectionKind::kRotation;
  throw Error(ErrorCode::kParseFailure, "unknown correction kind '" + s + "'");
}

void SessionParams::validate() const {
  if (max_corrections < 0) throw Error(ErrorCode::kInvalidParams, "max_corrections must be >= 0");
  if (!(probe_distance_scale > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "probe_distance_scale must be > 0");
  }
  pull.validate();
}

Diagnosis diagnose(const Trajectory& trajectory, double movement_epsilon) {
  return total_displacement(trajectory) >= movement_epsilon ? Diagnosis::kMoved
                                                            : Diagnosis::kNoMotion;
}

Trajectory probe_normal(ArticulatedObject& object, const Observation& observation,
                        Pixel contact_pixel, const PullParams& params, double distance_scale) {
  const Vec3 contact = lift_pixel(observation, contact_pixel);
  const int part_id = observation.part_id[contact_pixel];
  const Vec3 n = surface_normal(object, part_id, contact);
  return execute_pull_at(object, part_id, contact, n, distance_scale * params.total_distance,
                          params);
}

namespace {

enum class Next { kPosition, kRotation, kNone };

class Asker {
 public:
  Asker(Policy& policy, const PromptTemplates& templates) : policy_(policy), templates_(templates) {}

  /// Sends the request, re-asks once if `accept` rejects the reply.
  template <typename T>
  T ask(PolicyRequest request, const std::function<std::optional<T>(const std::string&)>& accept,
        std::vector<TranscriptEntry>& transcript) {
    const std::string base_prompt = request.prompt;
    for (int attempt = 0; attempt < 2; ++attempt) {
      request.reask = attempt > 0;
      if (request.reask) request.prompt = base_prompt + "\n" + templates_.get("reask");
      std::string reply = policy_.respond(request);
      transcript.push_back({request.task, request.step, request.prompt, reply, request.reask});
      if (auto value = accept(reply)) return *value;
    }
    throw Error(ErrorCode::kPolicyFailure,
                "unusable " + to_string(request.task) +
                    (request.step ? " step " + std::to_string(request.step) : std::string()) +
                    " answer after re-ask");
  }

 private:
  Policy& policy_;
  const PromptTemplates& templates_;
};

std::function<std::optional<Action>(const std::string&)> action_acceptor(
    const Observation& observation, Primitive primitive) {
  return [&observation, primitive](const std::string& reply) -> std::optional<Action> {
    auto action = parse_action(reply, primitive);
    if (!action) return std::nullopt;
    const Pixel p = action->contact_pixel;
    if (!observation.foreground(p)) return std::nullopt;
    if (observation.mask_layer.contains(p) && observation.mask_layer[p]) return std::nullopt;
    return action;
  };
}

std::optional<bool> accept_yes_no(const std::string& reply) { return parse_yes_no(reply); }

}  // namespace

SessionLog run_session(const ArticulatedObject& object, const Camera& camera, Policy& policy,
                       const Instruction& instruction, const SessionParams& params,
                       const std::string& sample_id, std::uint64_t seed) {
  params.validate();
  const PromptTemplates& templates =
      params.templates != nullptr ? *params.templates : default_templates();
  const double eps = params.pull.movement_epsilon;

  SessionLog log;
  log.sample_id = sample_id;
  log.seed = seed;
  log.object_asset = write_asset(object);
  log.camera = camera;
  log.instruction = instruction;
  // Attempt records are referenced by pointer below; never reallocate.
  log.attempts.reserve(static_cast<std::size_t>(params.max_corrections) + 1);

  const Observation clean = render(object, camera);
  policy.begin_sample({sample_id, &object, camera, instruction, seed});
  Asker asker(policy, templates);

  // Moving trajectories observed so far, with their feedback references.
  std::vector<std::pair<const Trajectory*, int>> moving;

  std::vector<TranscriptEntry> transcript;
  Action action;
  CorrectionKind kind = CorrectionKind::kNone;

  try {
    PolicyRequest req;
    req.session_id = sample_id;
    req.task = TaskKind::kPredict;
    req.prompt = build_predict_prompt(instruction, templates);
    req.observation = &clean;
    req.instruction = instruction;
    action = asker.ask<Action>(req, action_acceptor(clean, instruction.primitive), transcript);

    for (int index = 0;; ++index) {
      AttemptRecord rec;
      rec.index = index;
      rec.action = action;
      rec.correction_kind = kind;
      rec.prompts = std::move(transcript);
      transcript.clear();

      ArticulatedObject scene = object;
      rec.trajectory = execute_pull(scene, clean, action, params.pull);
      rec.report = evaluate_success(object, action, rec.trajectory, params.success);

      Next next = Next::kNone;
      if (!rec.report.success) {
        if (diagnose(rec.trajectory, eps) == Diagnosis::kMoved) {
          rec.cause = FailureCause::kMoved;
          next = Next::kRotation;
        } else {
          ArticulatedObject probe_scene = object;
          rec.probe = probe_normal(probe_scene, clean, action.contact_pixel, params.pull,
                                   params.probe_distance_scale);
          if (diagnose(*rec.probe, eps) == Diagnosis::kMoved) {
            rec.cause = FailureCause::kNoMotionProbeMoved;
            next = Next::kRotation;
          } else {
            rec.cause = FailureCause::kNoMotionContactInvalid;
            if (!movability_query(object, clean, action.contact_pixel)) {
              log.feedback = accumulate(std::move(log.feedback),
                                        segment_unmovable(object, clean, action.contact_pixel));
            }
            next = any(log.feedback.mask_union()) ? Next::kPosition : Next::kNone;
          }
        }
      }
      log.attempts.push_back(std::move(rec));
      const AttemptRecord& last = log.attempts.back();
      if (last.cause == FailureCause::kMoved) {
        moving.emplace_back(&last.trajectory, index);
      } else if (last.cause == FailureCause::kNoMotionProbeMoved) {
        moving.emplace_back(&*last.probe, -(index + 1));
      }

      if (last.report.success) {
        log.final_success = true;
        break;
      }
      if (log.corrections_used >= params.max_corrections) {
        log.stop_reason = "budget";
        break;
      }
      if (next == Next::kNone) {
        log.stop_reason = "no_correction";
        break;
      }
      if (next == Next::kRotation && !params.rotation_correction) {
        log.stop_reason = "rotation_disabled";
        break;
      }
      if (next == Next::kPosition && !params.position_correction) {
        log.stop_reason = "position_disabled";
        break;
      }

      if (next == Next::kRotation) {
        const Pixel contact = last.action.contact_pixel;
        const int part_id = clean.part_id[contact];
        std::vector<const Trajectory*> same_part;
        std::vector<int> refs;
        const Trajectory* longest = nullptr;
        for (const auto& [traj, ref] : moving) {
          if (traj->contacted_part != part_id) continue;
          same_part.push_back(traj);
          refs.push_back(ref);
          if (longest == nullptr || total_displacement(*traj) > total_displacement(*longest)) {
            longest = traj;
          }
        }
        JointEstimate estimate;
        estimate.kind = classify_joint(*longest, params.classify);
        try {
          estimate.axis = estimate_axis_multi(same_part, estimate.kind, params.axis);
        } catch (const Error&) {
          estimate.kind = EstimatedKind::kPrismatic;
          estimate.axis = estimate_axis_multi(same_part, estimate.kind, params.axis);
        }
        estimate.confidence = static_cast<int>(same_part.size());
        log.feedback.joint_estimate = estimate;
        log.feedback.trajectory_refs = refs;

        const Vec3 normal = surface_normal(object, part_id, lift_pixel(clean, contact));
        PolicyRequest rreq;
        rreq.session_id = sample_id;
        rreq.task = TaskKind::kRotationCorrect;
        rreq.prompt = build_rotation_prompt(estimate, contact, normal, templates);
        rreq.observation = &clean;
        rreq.instruction = instruction;
        rreq.previous_action = last.action;
        rreq.rotation = RotationFields{estimate.kind, *estimate.axis, contact, normal,
                                       last.action.commanded_motion()};
        rreq.attempt_index = index + 1;
        const DirectionBins bins = asker.ask<DirectionBins>(
            rreq, [](const std::string& r) { return parse_bins(r); }, transcript);
        action = Action{contact, decode_direction(bins), instruction.primitive};
        kind = CorrectionKind::kRotation;
      } else {
        const Observation masked = overlay_mask(clean, log.feedback.mask_union());
        PolicyRequest creq;
        creq.session_id = sample_id;
        creq.task = TaskKind::kPositionCot;
        creq.observation = &masked;
        creq.instruction = instruction;
        creq.previous_action = last.action;
        creq.attempt_index = index + 1;
        for (int step = 1; step <= 3; ++step) {
          creq.step = step;
          creq.prompt = build_position_cot(masked, last.action, step, instruction, std::nullopt,
                                           templates);
          asker.ask<bool>(creq, accept_yes_no, transcript);
        }
        creq.step = 4;
        creq.prompt = build_position_cot(masked, last.action, 4, instruction, std::nullopt,
                                         templates);
        action = asker.ask<Action>(creq, action_acceptor(masked, instruction.primitive),
                                   transcript);
        creq.step = 5;
        creq.proposed_action = action;
        creq.prompt = build_position_cot(masked, last.action, 5, instruction, action, templates);
        asker.ask<bool>(creq, accept_yes_no, transcript);  // advisory only
        kind = CorrectionKind::kPosition;
      }
      ++log.corrections_used;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kPolicyFailure) throw;
    log.error = e.what();
    log.final_success = false;
    log.stop_reason = "policy_failure";
    // The rejected exchange stays with the last executed attempt; when the
    // very first prediction fails it is kept on its own.
    if (!log.attempts.empty()) {
      for (auto& t : transcript) log.attempts.back().prompts.push_back(std::move(t));
    } else {
      log.unexecuted_prompts = std::move(transcript);
    }
  }
  return log;
}

// ---------------------------------------------------------------------------

std::vector<ExperienceItem> extract_experience(const SessionLog& log, const TtaOptions& options) {
  std::vector<ExperienceItem> items;
  const BoolGrid mask = log.feedback.mask_union();
  if (any(mask)) {
    ExperienceItem masked;
    masked.kind = ExperienceKind::kMaskPresenceVqa;
    masked.observation_ref = log.sample_id + "/masked";
    masked.mask = mask;
    masked.presence_answer = true;
    masked.target_answer = format_yes_no(true);
    items.push_back(std::move(masked));

    ExperienceItem clean;
    clean.kind = ExperienceKind::kMaskPresenceVqa;
    clean.observation_ref = log.sample_id + "/clean";
    clean.presence_answer = false;
    clean.target_answer = format_yes_no(false);
    items.push_back(std::move(clean));

    ExperienceItem position;
    position.kind = ExperienceKind::kMaskPositionVqa;
    position.observation_ref = log.sample_id + "/masked";
    position.mask = mask;
    std::mt19937_64 rng(mix_seed(log.seed, fnv1a(log.sample_id), fnv1a("mask-position")));
    std::vector<Pixel> on;
    std::vector<Pixel> off;
    for (int v = 0; v < mask.height(); ++v) {
      for (int u = 0; u < mask.width(); ++u) (mask(u, v) ? on : off).push_back({u, v});
    }
    for (int i = 0; i < options.position_pixels; ++i) {
      Pixel p;
      if (options.balanced_positions && !off.empty()) {
        const auto& pool = (i % 2 == 0) ? on : off;
        p = pool[uniform_index(rng, pool.size())];
      } else {
        p = {static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(mask.width()))),
             static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(mask.height())))};
      }
      position.labeled_pixels.emplace_back(p, mask[p] != 0);
      position.target_answer += (i ? " " : "") + format_yes_no(mask[p] != 0);
    }
    items.push_back(std::move(position));
  }
  for (const auto& a : log.attempts) {
    if (a.index >= 1 && a.report.success) {
      ExperienceItem sup;
      sup.kind = ExperienceKind::kCorrectedPoseSupervision;
      sup.observation_ref = log.sample_id + "/clean";
      sup.target = a.action;
      sup.target_answer = format_action_answer(a.action);
      items.push_back(std::move(sup));
    }
  }
  return items;
}

std::size_t tta_step(Policy& policy, const SessionLog& log, const TtaSchedule& schedule,
                     std::int64_t& iteration, const TtaOptions& options) {
  if (!policy.adaptive()) return 0;
  const auto items = extract_experience(log, options);
  if (items.empty()) return 0;
  policy.adapt(items, schedule.lr(iteration), schedule.weight_decay);
  iteration += static_cast<std::int64_t>(items.size());
  return items.size();
}

}  // namespace corrsim
