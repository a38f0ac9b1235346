#include "corrsim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "corrsim/error.hpp"
#include "corrsim/prompts.hpp"
#include "corrsim/rng.hpp"

namespace corrsim {

namespace {

Vec3 gripper_for_motion(const Vec3& motion, Primitive primitive) {
  return primitive == Primitive::kPull ? motion : Vec3(-motion);
}

void require_observation(const PolicyRequest& request) {
  if (request.observation == nullptr) {
    throw Error(ErrorCode::kInvalidParams, "policy request without observation");
  }
}

bool on_mask(const Observation& obs, Pixel p) {
  return obs.mask_layer.contains(p) && obs.mask_layer[p] != 0;
}

}  // namespace

// ---------------------------------------------------------------------------

DirectionBins encode_components(const Vec3& v) {
  DirectionBins out;
  for (int i = 0; i < 3; ++i) {
    const double b = std::floor((v[i] + 1.0) / kBinWidth);
    out.bins[static_cast<std::size_t>(i)] =
        static_cast<int>(std::clamp(b, 0.0, static_cast<double>(kDirectionBins - 1)));
  }
  return out;
}

DirectionBins encode_direction(const Vec3& v) {
  if (!(std::abs(v.norm() - 1.0) <= 1e-6)) {
    throw Error(ErrorCode::kNotUnit, "direction is not unit length");
  }
  return encode_components(v);
}

Vec3 decode_direction_centers(const DirectionBins& bins) {
  Vec3 c;
  for (int i = 0; i < 3; ++i) {
    const int b = bins.bins[static_cast<std::size_t>(i)];
    if (b < 0 || b >= kDirectionBins) throw Error(ErrorCode::kInvalidParams, "bin out of range");
    c[i] = -1.0 + kBinWidth * b + 0.5 * kBinWidth;
  }
  return c;
}

Vec3 decode_direction(const DirectionBins& bins) {
  const Vec3 c = decode_direction_centers(bins);
  if (c.norm() < 1e-12) throw Error(ErrorCode::kDegenerateZero, "bin centers are zero");
  return c.normalized();
}

double TtaSchedule::lr(std::int64_t iteration) const {
  const auto stage = iteration <= 0 ? 0 : iteration / std::max(1, decay_every);
  return lr0 * std::pow(decay_factor, static_cast<double>(stage));
}

TtaSchedule learnable_default_schedule() {
  TtaSchedule s;
  s.lr0 = 1.0;
  return s;
}

std::string to_string(ExperienceKind kind) {
  switch (kind) {
    case ExperienceKind::kMaskPresenceVqa: return "mask_presence_vqa";
    case ExperienceKind::kMaskPositionVqa: return "mask_position_vqa";
    case ExperienceKind::kCorrectedPoseSupervision: return "corrected_pose_supervision";
  }
  return "mask_presence_vqa";
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kPredict: return "predict";
    case TaskKind::kPositionCot: return "position_cot";
    case TaskKind::kRotationCorrect: return "rotation_correct";
  }
  return "predict";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "predict") return TaskKind::kPredict;
  if (s == "position_cot") return TaskKind::kPositionCot;
  if (s == "rotation_correct") return TaskKind::kRotationCorrect;
  throw Error(ErrorCode::kProtocolViolation, "unknown task kind '" + s + "'");
}

// ---------------------------------------------------------------------------

Action oracle_action(const ArticulatedObject& object, const Observation& observation,
                     Primitive primitive, const BoolGrid* exclude) {
  const auto& ids = observation.part_id;
  auto usable = [&](Pixel p) {
    const int id = ids[p];
    if (id < 0 || !object.part(id).movable) return false;
    return exclude == nullptr || !exclude->contains(p) || (*exclude)[p] == 0;
  };

  std::map<int, std::size_t> counts;
  for (int v = 0; v < ids.height(); ++v) {
    for (int u = 0; u < ids.width(); ++u) {
      if (usable({u, v})) ++counts[ids(u, v)];
    }
  }
  if (counts.empty()) throw Error(ErrorCode::kNoMovableVisible, "no movable part is visible");
  int best_id = counts.begin()->first;
  for (const auto& [id, n] : counts) {
    if (n > counts[best_id]) best_id = id;
  }

  double cu = 0.0;
  double cv = 0.0;
  for (int v = 0; v < ids.height(); ++v) {
    for (int u = 0; u < ids.width(); ++u) {
      if (ids(u, v) == best_id && usable({u, v})) {
        cu += u;
        cv += v;
      }
    }
  }
  const auto n = static_cast<double>(counts[best_id]);
  cu /= n;
  cv /= n;

  Pixel best{};
  double best_d = std::numeric_limits<double>::infinity();
  for (int v = 0; v < ids.height(); ++v) {
    for (int u = 0; u < ids.width(); ++u) {
      if (ids(u, v) != best_id || !usable({u, v})) continue;
      const double d = (u - cu) * (u - cu) + (v - cv) * (v - cv);
      if (d < best_d) {
        best_d = d;
        best = {u, v};
      }
    }
  }

  const Vec3 contact = lift_pixel(observation, best);
  const Vec3 m = joint_motion_direction(object, best_id, contact);
  const Joint& joint = *object.part(best_id).joint;
  const double q = object.q(best_id);
  const Vec3 motion = (joint.q_hi - q >= q - joint.q_lo) ? m : Vec3(-m);
  return Action{best, gripper_for_motion(motion, primitive), primitive};
}

Vec3 axis_implied_direction(const RotationFields& fields) {
  const Vec3 axis = fields.axis.normalized();
  if (fields.kind == EstimatedKind::kPrismatic) return axis;
  Vec3 d = fields.normal - fields.normal.dot(axis) * axis;
  if (d.norm() < 0.3) d = fields.previous_direction - fields.previous_direction.dot(axis) * axis;
  if (d.norm() < 1e-9) d = axis.unitOrthogonal();
  return d.normalized();
}

Vec3 perturb_direction(const Vec3& direction, double angle, std::mt19937_64& rng) {
  const Vec3 d = direction.normalized();
  const Vec3 e1 = d.unitOrthogonal();
  const Vec3 e2 = d.cross(e1);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const Vec3 k = std::cos(phi) * e1 + std::sin(phi) * e2;
  return (d * std::cos(angle) + k.cross(d) * std::sin(angle)).normalized();
}

// ---------------------------------------------------------------------------

void OraclePolicy::begin_sample(const SampleContext& context) {
  if (context.object == nullptr) {
    throw Error(ErrorCode::kInvalidParams, "reference policies need the ground-truth object");
  }
  object_ = *context.object;
  instruction_ = context.instruction;
}

const ArticulatedObject& OraclePolicy::object() const {
  if (!object_) throw Error(ErrorCode::kInvalidParams, "begin_sample was not called");
  return *object_;
}

std::string OraclePolicy::answer_cot_question(const PolicyRequest& request) const {
  const Observation& obs = *request.observation;
  switch (request.step) {
    case 1: return format_yes_no(any(obs.mask_layer));
    case 2: return format_yes_no(request.previous_action &&
                                 on_mask(obs, request.previous_action->contact_pixel));
    case 3: {
      if (!request.previous_action) return format_yes_no(false);
      const Pixel p = request.previous_action->contact_pixel;
      return format_yes_no(obs.foreground(p) && !object().part(obs.part_id[p]).movable);
    }
    case 5: return format_yes_no(true);
    default: break;
  }
  throw Error(ErrorCode::kInvalidParams, "no yes/no question at this step");
}

std::string OraclePolicy::respond(const PolicyRequest& request) {
  require_observation(request);
  const Primitive prim = request.instruction.primitive;
  switch (request.task) {
    case TaskKind::kPredict:
      return format_action_answer(oracle_action(object(), *request.observation, prim));
    case TaskKind::kPositionCot:
      if (request.step == 4) {
        return format_action_answer(
            oracle_action(object(), *request.observation, prim, &request.observation->mask_layer));
      }
      return answer_cot_question(request);
    case TaskKind::kRotationCorrect: {
      if (!request.rotation) throw Error(ErrorCode::kInvalidParams, "missing rotation fields");
      return format_bins(
          encode_direction(gripper_for_motion(axis_implied_direction(*request.rotation), prim)));
    }
  }
  return "";
}

// ---------------------------------------------------------------------------

PerturbedPolicy::PerturbedPolicy(PerturbationNoise noise) : noise_(noise) {
  if (noise.p_static < 0.0 || noise.p_static > 1.0) {
    throw Error(ErrorCode::kInvalidParams, "p_static must be in [0, 1]");
  }
  if (noise.sigma_dir < 0.0) throw Error(ErrorCode::kInvalidParams, "sigma_dir must be >= 0");
}

void PerturbedPolicy::begin_sample(const SampleContext& context) {
  OraclePolicy::begin_sample(context);
  rng_.seed(mix_seed(context.seed, fnv1a("perturbed")));
}

Action PerturbedPolicy::noisy_action(const Observation& observation, const BoolGrid* exclude) {
  Action a = oracle_action(object(), observation, instruction_.primitive, exclude);
  a.primitive = instruction_.primitive;
  if (bernoulli(rng_, noise_.p_static)) {
    std::vector<Pixel> statics;
    const auto& ids = observation.part_id;
    for (int v = 0; v < ids.height(); ++v) {
      for (int u = 0; u < ids.width(); ++u) {
        const Pixel p{u, v};
        if (ids[p] < 0 || object().part(ids[p]).movable) continue;
        if (exclude != nullptr && exclude->contains(p) && (*exclude)[p]) continue;
        statics.push_back(p);
      }
    }
    if (!statics.empty()) a.contact_pixel = statics[uniform_index(rng_, statics.size())];
  }
  if (noise_.sigma_dir > 0.0) {
    const double angle = normal(rng_, 0.0, noise_.sigma_dir);
    a.gripper_direction = perturb_direction(a.gripper_direction, angle, rng_);
  }
  return a;
}

std::string PerturbedPolicy::respond(const PolicyRequest& request) {
  require_observation(request);
  instruction_.primitive = request.instruction.primitive;
  switch (request.task) {
    case TaskKind::kPredict:
      return format_action_answer(noisy_action(*request.observation, nullptr));
    case TaskKind::kPositionCot:
      if (request.step == 4) {
        return format_action_answer(
            noisy_action(*request.observation, &request.observation->mask_layer));
      }
      return answer_cot_question(request);
    case TaskKind::kRotationCorrect:
      return OraclePolicy::respond(request);
  }
  return "";
}

// ---------------------------------------------------------------------------

LearnablePolicy::LearnablePolicy(std::uint64_t seed, double init_scale)
    : seed_(seed), init_scale_(init_scale) {
  std::mt19937_64 rng(mix_seed(seed_, fnv1a("direction-head")));
  for (auto& head : direction_logits_) {
    for (double& z : head) z = normal(rng, 0.0, init_scale_);
  }
}

void LearnablePolicy::ensure_shape(int width, int height) {
  if (pixel_logits_.width() == width && pixel_logits_.height() == height) return;
  std::mt19937_64 rng(mix_seed(seed_, fnv1a("pixel-grid"), static_cast<std::uint64_t>(width)));
  pixel_logits_ = Grid<double>(width, height, 0.0);
  for (double& z : pixel_logits_.data()) z = normal(rng, 0.0, init_scale_);
}

void LearnablePolicy::begin_sample(const SampleContext& context) {
  ensure_shape(context.camera.width, context.camera.height);
  instruction_ = context.instruction;
}

Pixel LearnablePolicy::best_pixel(const Observation& observation, const BoolGrid* exclude) const {
  Pixel best{-1, -1};
  double best_z = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < observation.part_id.height(); ++v) {
    for (int u = 0; u < observation.part_id.width(); ++u) {
      const Pixel p{u, v};
      if (!observation.foreground(p)) continue;
      if (exclude != nullptr && exclude->contains(p) && (*exclude)[p]) continue;
      const double z = pixel_logits_.contains(p) ? pixel_logits_[p] : 0.0;
      if (z > best_z) {
        best_z = z;
        best = p;
      }
    }
  }
  return best;
}

DirectionBins LearnablePolicy::best_bins() const {
  DirectionBins out;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& head = direction_logits_[i];
    out.bins[i] = static_cast<int>(std::max_element(head.begin(), head.end()) - head.begin());
  }
  return out;
}

std::string LearnablePolicy::respond(const PolicyRequest& request) {
  require_observation(request);
  const Observation& obs = *request.observation;
  ensure_shape(obs.part_id.width(), obs.part_id.height());
  const Primitive prim = request.instruction.primitive;
  auto action_answer = [&](const BoolGrid* exclude) {
    return format_pixel(best_pixel(obs, exclude)) + " " + format_bins(best_bins());
  };
  switch (request.task) {
    case TaskKind::kPredict:
      return action_answer(&obs.mask_layer);
    case TaskKind::kPositionCot:
      switch (request.step) {
        case 1: return format_yes_no(any(obs.mask_layer));
        case 2:
        case 3:
          return format_yes_no(request.previous_action &&
                               on_mask(obs, request.previous_action->contact_pixel));
        case 4: return action_answer(&obs.mask_layer);
        default: return format_yes_no(true);
      }
    case TaskKind::kRotationCorrect:
      if (!request.rotation) throw Error(ErrorCode::kInvalidParams, "missing rotation fields");
      return format_bins(
          encode_direction(gripper_for_motion(axis_implied_direction(*request.rotation), prim)));
  }
  return "";
}

void LearnablePolicy::adapt(std::span<const ExperienceItem> items, double lr, double weight_decay) {
  if (!(lr > 0.0)) return;
  auto push_down = [&](const std::vector<Pixel>& pixels) {
    if (pixels.empty() || pixel_logits_.size() == 0) return;
    BoolGrid hit(pixel_logits_.width(), pixel_logits_.height(), 0);
    for (const Pixel p : pixels) {
      if (hit.contains(p)) hit[p] = 1;
    }
    double floor_z = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hit.size(); ++i) {
      if (!hit.data()[i]) floor_z = std::min(floor_z, pixel_logits_.data()[i]);
    }
    for (std::size_t i = 0; i < hit.size(); ++i) {
      if (!hit.data()[i]) continue;
      double& z = pixel_logits_.data()[i];
      if (std::isfinite(floor_z)) z = std::min(z, floor_z);
      z -= lr;
    }
  };
  auto cross_entropy_step = [&](std::span<double> logits, std::size_t target) {
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - zmax);
    std::vector<double> grad(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      grad[i] = std::exp(logits[i] - zmax) / sum - (i == target ? 1.0 : 0.0);
    }
    for (std::size_t i = 0; i < logits.size(); ++i) {
      logits[i] -= lr * (grad[i] + weight_decay * logits[i]);
    }
  };

  for (const auto& item : items) {
    switch (item.kind) {
      case ExperienceKind::kMaskPresenceVqa: {
        if (!item.presence_answer || item.mask.size() == 0) break;
        std::vector<Pixel> pixels;
        for (int v = 0; v < item.mask.height(); ++v) {
          for (int u = 0; u < item.mask.width(); ++u) {
            if (item.mask(u, v)) pixels.push_back({u, v});
          }
        }
        push_down(pixels);
        break;
      }
      case ExperienceKind::kMaskPositionVqa: {
        std::vector<Pixel> pixels;
        for (const auto& [p, on] : item.labeled_pixels) {
          if (on) pixels.push_back(p);
        }
        push_down(pixels);
        break;
      }
      case ExperienceKind::kCorrectedPoseSupervision: {
        if (!item.target) break;
        const DirectionBins bins = encode_direction(item.target->gripper_direction);
        for (std::size_t i = 0; i < 3; ++i) {
          cross_entropy_step(direction_logits_[i], static_cast<std::size_t>(bins.bins[i]));
        }
        const Pixel p = item.target->contact_pixel;
        if (pixel_logits_.contains(p)) {
          const auto target = static_cast<std::size_t>(p.v) *
                                  static_cast<std::size_t>(pixel_logits_.width()) +
                              static_cast<std::size_t>(p.u);
          cross_entropy_step(pixel_logits_.data(), target);
        }
        break;
      }
    }
  }
}

}  // namespace corrsim
