#include "corrsim/bridge.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <regex>
#include <thread>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "corrsim/asset.hpp"
#include "corrsim/error.hpp"
#include "corrsim/prompts.hpp"

namespace corrsim {

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

[[noreturn]] void violation(const std::string& what) {
  throw Error(ErrorCode::kProtocolViolation, what);
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (static_cast<unsigned char>(bytes[i]) << 16) |
                   (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                   static_cast<unsigned char>(bytes[i + 2]);
    out += kB64[(n >> 18) & 63];
    out += kB64[(n >> 12) & 63];
    out += kB64[(n >> 6) & 63];
    out += kB64[n & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const auto n = static_cast<unsigned char>(bytes[i]) << 16;
    out += kB64[(n >> 18) & 63];
    out += kB64[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const auto n = (static_cast<unsigned char>(bytes[i]) << 16) |
                   (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += kB64[(n >> 18) & 63];
    out += kB64[(n >> 12) & 63];
    out += kB64[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) violation("base64 length is not a multiple of 4");
  auto value = [](char c) -> int {
    const char* p = std::strchr(kB64, c);
    return (c != '\0' && p != nullptr) ? static_cast<int>(p - kB64) : -1;
  };
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        if (pad > 0) violation("base64 data after padding");
        v[k] = value(c);
        if (v[k] < 0) violation("invalid base64 character");
      }
    }
    const int n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out += static_cast<char>((n >> 16) & 0xff);
    if (pad < 2) out += static_cast<char>((n >> 8) & 0xff);
    if (pad < 1) out += static_cast<char>(n & 0xff);
  }
  return out;
}

std::string encode_frame(const std::string& payload) {
  return std::to_string(payload.size()) + "\n" + payload;
}

// ---------------------------------------------------------------------------

FdChannel::FdChannel(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds) {}

FdChannel::~FdChannel() { close(); }

void FdChannel::close() {
  if (!owns_) {
    read_fd_ = write_fd_ = -1;
    return;
  }
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
  if (child_ > 0) {
    const pid_t pid = child_;
    child_ = -1;
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(pid, nullptr, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid, SIGTERM);
    ::waitpid(pid, nullptr, 0);
  }
}

void FdChannel::send(const Json& message) {
  if (write_fd_ < 0) throw Error(ErrorCode::kConnection, "channel is closed");
  const std::string frame = encode_frame(message.dump());
  std::size_t done = 0;
  while (done < frame.size()) {
    ssize_t n = ::send(write_fd_, frame.data() + done, frame.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) n = ::write(write_fd_, frame.data() + done, frame.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::kConnection, std::string("send failed: ") + std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
}

bool FdChannel::read_exact(char* buf, std::size_t n, bool eof_ok) {
  std::size_t done = 0;
  while (done < n) {
    const ssize_t r = ::read(read_fd_, buf + done, n - done);
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw Error(ErrorCode::kConnection, std::string("read failed: ") + std::strerror(errno));
    if (r == 0) {
      if (eof_ok && done == 0) return false;
      throw Error(ErrorCode::kConnection, "peer closed the stream mid-frame");
    }
    done += static_cast<std::size_t>(r);
  }
  return true;
}

std::optional<Json> FdChannel::receive() {
  if (read_fd_ < 0) throw Error(ErrorCode::kConnection, "channel is closed");
  std::string header;
  char c = 0;
  if (!read_exact(&c, 1, true)) return std::nullopt;
  while (c != '\n') {
    if (c < '0' || c > '9' || header.size() >= 10) violation("bad frame length header");
    header += c;
    read_exact(&c, 1, false);
  }
  if (header.empty()) violation("empty frame length header");
  const auto len = std::stoull(header);
  if (len > kMaxFrameBytes) violation("frame exceeds size limit");
  std::string payload(len, '\0');
  read_exact(payload.data(), len, false);
  try {
    return Json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    violation(std::string("frame is not JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

std::string to_string(MessageType type) {
  switch (type) {
    case MessageType::kHello: return "hello";
    case MessageType::kBegin: return "begin";
    case MessageType::kRequest: return "request";
    case MessageType::kResponse: return "response";
    case MessageType::kError: return "error";
    case MessageType::kBye: return "bye";
  }
  return "hello";
}

namespace {

MessageType message_type_from_string(const std::string& s) {
  for (auto t : {MessageType::kHello, MessageType::kBegin, MessageType::kRequest,
                 MessageType::kResponse, MessageType::kError, MessageType::kBye}) {
    if (to_string(t) == s) return t;
  }
  violation("unknown message type '" + s + "'");
}

Json optional_action(const std::optional<Action>& a) { return a ? to_json(*a) : Json(); }

Json rotation_to_json(const RotationFields& r) {
  return {{"kind", to_string(r.kind)},          {"axis", to_json(r.axis)},
          {"contact", to_json(r.contact)},      {"normal", to_json(r.normal)},
          {"previous_direction", to_json(r.previous_direction)}};
}

RotationFields rotation_from_json(const Json& j) {
  RotationFields r;
  JointEstimate e = estimate_from_json({{"kind", j.at("kind")}, {"axis", nullptr}, {"confidence", 0}});
  r.kind = e.kind;
  r.axis = vec3_from_json(j.at("axis"));
  r.contact = pixel_from_json(j.at("contact"));
  r.normal = vec3_from_json(j.at("normal"));
  r.previous_direction = vec3_from_json(j.at("previous_direction"));
  return r;
}

}  // namespace

bool operator==(const RequestFields& a, const RequestFields& b) {
  return a.primitive == b.primitive && a.instruction == b.instruction &&
         a.attempt_index == b.attempt_index && a.previous_action == b.previous_action &&
         a.proposed_action == b.proposed_action && a.rotation == b.rotation && a.mask == b.mask;
}

Json encode_message(const BridgeMessage& m) {
  Json j = {{"v", m.version}, {"type", to_string(m.type)}};
  switch (m.type) {
    case MessageType::kHello:
      j["role"] = m.role;
      j["name"] = m.name;
      break;
    case MessageType::kBegin:
      j["session"] = m.session;
      j["begin"] = {
          {"instruction", m.begin.instruction.text},
          {"primitive", to_string(m.begin.instruction.primitive)},
          {"camera", to_json(m.begin.camera)},
          {"canvas",
           {{"width", m.begin.mapping.width},
            {"height", m.begin.mapping.height},
            {"offset", {m.begin.mapping.offset_u, m.begin.mapping.offset_v}}}},
          {"seed", m.begin.seed},
          {"object_asset", m.begin.object_asset ? Json(*m.begin.object_asset) : Json()},
      };
      break;
    case MessageType::kRequest: {
      j["id"] = m.id;
      j["session"] = m.session;
      j["task"] = to_string(m.task);
      j["step"] = m.step;
      j["prompt"] = m.prompt;
      j["reask"] = m.reask;
      Json atts = Json::array();
      for (const auto& a : m.attachments) {
        Json aj = {{"kind", a.kind}};
        if (!a.path.empty()) aj["path"] = a.path;
        if (!a.data.empty()) {
          aj["encoding"] = "base64";
          aj["data"] = base64_encode(a.data);
        }
        atts.push_back(aj);
      }
      j["attachments"] = atts;
      j["fields"] = {
          {"primitive", to_string(m.fields.primitive)},
          {"instruction", m.fields.instruction},
          {"attempt_index", m.fields.attempt_index},
          {"previous_action", optional_action(m.fields.previous_action)},
          {"proposed_action", optional_action(m.fields.proposed_action)},
          {"rotation", m.fields.rotation ? rotation_to_json(*m.fields.rotation) : Json()},
          {"mask", to_json(m.fields.mask)},
      };
      break;
    }
    case MessageType::kResponse:
      j["id"] = m.id;
      j["text"] = m.text;
      break;
    case MessageType::kError:
      j["id"] = m.id;
      j["message"] = m.message;
      break;
    case MessageType::kBye:
      break;
  }
  return j;
}

BridgeMessage decode_message(const Json& j) {
  BridgeMessage m;
  try {
    if (!j.is_object()) violation("message is not an object");
    m.version = j.at("v").get<int>();
    if (m.version != kBridgeProtocolVersion) {
      violation("unsupported protocol version " + std::to_string(m.version));
    }
    m.type = message_type_from_string(j.at("type").get<std::string>());
    switch (m.type) {
      case MessageType::kHello:
        m.role = j.at("role").get<std::string>();
        m.name = j.at("name").get<std::string>();
        break;
      case MessageType::kBegin: {
        m.session = j.at("session").get<std::string>();
        const Json& b = j.at("begin");
        m.begin.instruction.text = b.at("instruction").get<std::string>();
        m.begin.instruction.primitive = primitive_from_string(b.at("primitive").get<std::string>());
        m.begin.camera = camera_from_json(b.at("camera"));
        const Json& c = b.at("canvas");
        m.begin.mapping = {c.at("width").get<int>(), c.at("height").get<int>(),
                           c.at("offset").at(0).get<int>(), c.at("offset").at(1).get<int>()};
        m.begin.seed = b.at("seed").get<std::uint64_t>();
        if (!b.at("object_asset").is_null()) m.begin.object_asset = b.at("object_asset").get<std::string>();
        break;
      }
      case MessageType::kRequest: {
        m.id = j.at("id").get<std::uint64_t>();
        m.session = j.at("session").get<std::string>();
        m.task = task_kind_from_string(j.at("task").get<std::string>());
        m.step = j.at("step").get<int>();
        m.prompt = j.at("prompt").get<std::string>();
        m.reask = j.at("reask").get<bool>();
        for (const auto& aj : j.at("attachments")) {
          Attachment a;
          a.kind = aj.at("kind").get<std::string>();
          if (aj.contains("path")) a.path = aj.at("path").get<std::string>();
          if (aj.contains("data")) {
            if (aj.value("encoding", "") != "base64") violation("unsupported attachment encoding");
            a.data = base64_decode(aj.at("data").get<std::string>());
          }
          m.attachments.push_back(std::move(a));
        }
        const Json& f = j.at("fields");
        m.fields.primitive = primitive_from_string(f.at("primitive").get<std::string>());
        m.fields.instruction = f.at("instruction").get<std::string>();
        m.fields.attempt_index = f.at("attempt_index").get<int>();
        if (!f.at("previous_action").is_null()) m.fields.previous_action = action_from_json(f.at("previous_action"));
        if (!f.at("proposed_action").is_null()) m.fields.proposed_action = action_from_json(f.at("proposed_action"));
        if (!f.at("rotation").is_null()) m.fields.rotation = rotation_from_json(f.at("rotation"));
        m.fields.mask = mask_from_json(f.at("mask"));
        break;
      }
      case MessageType::kResponse:
        m.id = j.at("id").get<std::uint64_t>();
        m.text = j.at("text").get<std::string>();
        break;
      case MessageType::kError:
        m.id = j.at("id").get<std::uint64_t>();
        m.message = j.at("message").get<std::string>();
        break;
      case MessageType::kBye:
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    violation(std::string("malformed message: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProtocolViolation) throw;
    violation(std::string("malformed message: ") + e.what());
  }
  return m;
}

std::string shift_pixels(const std::string& text, int du, int dv) {
  static const std::regex re(R"(\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\))");
  std::string out;
  auto begin = std::sregex_iterator(text.begin(), text.end(), re);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(text, last, static_cast<std::size_t>(m.position()) - last);
    try {
      out += format_pixel({std::stoi(m[1].str()) + du, std::stoi(m[2].str()) + dv});
    } catch (const std::out_of_range&) {
      out += m.str();
    }
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  out.append(text, last);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Action shifted(Action a, int du, int dv) {
  a.contact_pixel = {a.contact_pixel.u + du, a.contact_pixel.v + dv};
  return a;
}

std::optional<Action> shifted(const std::optional<Action>& a, int du, int dv) {
  if (!a) return std::nullopt;
  return shifted(*a, du, dv);
}

}  // namespace

BridgePolicy::BridgePolicy(std::shared_ptr<FdChannel> channel, BridgeOptions options)
    : channel_(std::move(channel)), options_(std::move(options)) {}

BridgePolicy::~BridgePolicy() {
  if (!greeted_) return;
  try {
    BridgeMessage bye;
    bye.type = MessageType::kBye;
    channel_->send(encode_message(bye));
  } catch (const Error&) {
  }
}

void BridgePolicy::handshake() {
  if (greeted_) return;
  BridgeMessage hello;
  hello.type = MessageType::kHello;
  hello.role = "simulator";
  hello.name = options_.name;
  channel_->send(encode_message(hello));
  auto reply = channel_->receive();
  if (!reply) throw Error(ErrorCode::kConnection, "peer closed before hello");
  const BridgeMessage m = decode_message(*reply);
  if (m.type != MessageType::kHello) violation("expected hello, got " + to_string(m.type));
  peer_name_ = m.name;
  greeted_ = true;
}

void BridgePolicy::begin_sample(const SampleContext& context) {
  handshake();
  session_ = context.sample_id;
  mapping_ = canvas_mapping(context.camera.width, context.camera.height, options_.image_size);
  BridgeMessage m;
  m.type = MessageType::kBegin;
  m.session = session_;
  m.begin.instruction = context.instruction;
  m.begin.camera = context.camera;
  m.begin.mapping = mapping_;
  m.begin.seed = context.seed;
  if (options_.share_ground_truth && context.object != nullptr) {
    m.begin.object_asset = write_asset(*context.object);
  }
  channel_->send(encode_message(m));
}

BridgeMessage BridgePolicy::exchange(const BridgeMessage& request) {
  channel_->send(encode_message(request));
  while (true) {
    auto reply = channel_->receive();
    if (!reply) throw Error(ErrorCode::kConnection, "peer closed the connection");
    BridgeMessage m = decode_message(*reply);
    if (m.type == MessageType::kError) {
      violation("peer error: " + m.message);
    }
    if (m.type == MessageType::kBye) throw Error(ErrorCode::kConnection, "peer said bye mid-session");
    if (m.type != MessageType::kResponse) violation("expected response, got " + to_string(m.type));
    if (m.id != request.id) violation("response id does not match the request");
    return m;
  }
}

std::string BridgePolicy::respond(const PolicyRequest& request) {
  if (request.observation == nullptr) throw Error(ErrorCode::kInvalidParams, "request without observation");
  const int du = mapping_.offset_u;
  const int dv = mapping_.offset_v;
  BridgeMessage m;
  m.type = MessageType::kRequest;
  m.id = next_id_++;
  m.session = session_;
  m.task = request.task;
  m.step = request.step;
  m.prompt = shift_pixels(request.prompt, du, dv);
  m.reask = request.reask;
  m.fields.primitive = request.instruction.primitive;
  m.fields.instruction = request.instruction.text;
  m.fields.attempt_index = request.attempt_index;
  m.fields.previous_action = shifted(request.previous_action, du, dv);
  m.fields.proposed_action = shifted(request.proposed_action, du, dv);
  if (request.rotation) {
    RotationFields r = *request.rotation;
    r.contact = {r.contact.u + du, r.contact.v + dv};
    m.fields.rotation = r;
  }
  const Observation canvas = to_canvas(*request.observation, mapping_);
  m.fields.mask = canvas.mask_layer;

  if (!options_.export_dir.empty() || options_.inline_attachments) {
    const auto dir = options_.export_dir.empty() ? std::filesystem::temp_directory_path() / "corrsim-bridge"
                                                 : options_.export_dir;
    const std::string stem = session_ + "_" + std::to_string(m.id);
    const auto files = export_observation(*request.observation, dir, stem, options_.image_size);
    const std::pair<const char*, std::filesystem::path> parts[] = {
        {"image", files.image}, {"depth", files.depth}, {"mask", files.mask}, {"sidecar", files.sidecar}};
    for (const auto& [kind, path] : parts) {
      Attachment a;
      a.kind = kind;
      if (options_.inline_attachments) {
        a.data = read_text(path);
      } else {
        a.path = path.string();
      }
      m.attachments.push_back(std::move(a));
    }
  }

  const BridgeMessage reply = exchange(m);
  return shift_pixels(reply.text, -du, -dv);
}

// ---------------------------------------------------------------------------

namespace {

/// Observation the serving side can reconstruct: a full render when the
/// ground truth was shared, otherwise foreground from the depth attachment.
std::optional<Observation> reconstruct(const std::optional<ArticulatedObject>& object,
                                       const BeginFields& begin, const BridgeMessage& request) {
  Observation obs;
  if (object) {
    obs = to_canvas(render(*object, begin.camera), begin.mapping);
  } else {
    const Attachment* depth = nullptr;
    for (const auto& a : request.attachments) {
      if (a.kind == "depth") depth = &a;
    }
    if (depth == nullptr) return std::nullopt;
    Grid<std::uint16_t> img;
    if (!depth->data.empty()) {
      const auto tmp = std::filesystem::temp_directory_path() /
                       ("corrsim-serve-" + std::to_string(::getpid()) + ".pgm");
      write_text(tmp, depth->data);
      img = read_pgm16(tmp);
      std::filesystem::remove(tmp);
    } else {
      img = read_pgm16(depth->path);
    }
    obs.camera = canvas_camera(begin.camera.normalized(), begin.mapping);
    obs.depth = Grid<double>(img.width(), img.height(), kBackgroundDepth);
    obs.part_id = Grid<int>(img.width(), img.height(), -1);
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (img.data()[i] == 65535) continue;
      obs.depth.data()[i] = img.data()[i] / 65534.0;
      obs.part_id.data()[i] = 0;
    }
    obs.mask_layer = BoolGrid(img.width(), img.height(), 0);
  }
  if (request.fields.mask.same_shape(obs.part_id)) obs.mask_layer = request.fields.mask;
  return obs;
}

}  // namespace

std::size_t serve_bridge(FdChannel& channel, Policy& policy, const std::string& name) {
  std::size_t answered = 0;
  std::optional<ArticulatedObject> object;
  BeginFields begin;
  std::string begin_error;
  bool begun = false;
  auto send_error = [&](std::uint64_t id, const std::string& message) {
    BridgeMessage e;
    e.type = MessageType::kError;
    e.id = id;
    e.message = message;
    channel.send(encode_message(e));
  };

  while (true) {
    std::optional<Json> raw;
    try {
      raw = channel.receive();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConnection) return answered;
      throw;
    }
    if (!raw) return answered;
    BridgeMessage m;
    try {
      m = decode_message(*raw);
    } catch (const Error& e) {
      send_error(0, e.what());
      continue;
    }
    switch (m.type) {
      case MessageType::kHello: {
        BridgeMessage hello;
        hello.type = MessageType::kHello;
        hello.role = "policy";
        hello.name = name;
        channel.send(encode_message(hello));
        break;
      }
      case MessageType::kBegin:
        begin = m.begin;
        begin_error.clear();
        begun = true;
        try {
          object.reset();
          if (begin.object_asset) object = parse_asset(*begin.object_asset);
          policy.begin_sample({m.session, object ? &*object : nullptr,
                               canvas_camera(begin.camera.normalized(), begin.mapping),
                               begin.instruction, begin.seed});
        } catch (const Error& e) {
          begin_error = e.what();
        }
        break;
      case MessageType::kRequest: {
        if (!begun || !begin_error.empty()) {
          send_error(m.id, begun ? begin_error : "request before begin");
          break;
        }
        try {
          const auto obs = reconstruct(object, begin, m);
          if (!obs) {
            send_error(m.id, "no observation available");
            break;
          }
          PolicyRequest req;
          req.session_id = m.session;
          req.task = m.task;
          req.step = m.step;
          req.prompt = m.prompt;
          req.observation = &*obs;
          req.instruction = {m.fields.instruction, m.fields.primitive};
          req.previous_action = m.fields.previous_action;
          req.proposed_action = m.fields.proposed_action;
          req.rotation = m.fields.rotation;
          req.attempt_index = m.fields.attempt_index;
          req.reask = m.reask;
          BridgeMessage resp;
          resp.type = MessageType::kResponse;
          resp.id = m.id;
          resp.text = policy.respond(req);
          channel.send(encode_message(resp));
          ++answered;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kConnection) return answered;
          send_error(m.id, e.what());
        }
        break;
      }
      case MessageType::kBye:
        return answered;
      case MessageType::kResponse:
      case MessageType::kError:
        break;
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

std::pair<std::string, int> split_host_port(const std::string& hp) {
  const auto colon = hp.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kConfig, "endpoint needs host:port");
  try {
    return {hp.substr(0, colon), std::stoi(hp.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfig, "bad port in '" + hp + "'");
  }
}

}  // namespace

std::shared_ptr<FdChannel> connect_endpoint(const std::string& endpoint) {
  if (endpoint.rfind("tcp://", 0) == 0) {
    const auto [host, port] = split_host_port(endpoint.substr(6));
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
      throw Error(ErrorCode::kConnection, "cannot resolve " + host);
    }
    int fd = -1;
    for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
      fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw Error(ErrorCode::kConnection, "cannot connect to " + endpoint);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return std::make_shared<FdChannel>(fd, fd, true);
  }
  if (endpoint.rfind("exec:", 0) == 0) {
    int to_child[2];
    int from_child[2];
    std::signal(SIGPIPE, SIG_IGN);
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
      throw Error(ErrorCode::kConnection, "pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::kConnection, "fork failed");
    if (pid == 0) {
      ::dup2(to_child[0], 0);
      ::dup2(from_child[1], 1);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      const std::string cmd = endpoint.substr(5);
      ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    auto channel = std::make_shared<FdChannel>(from_child[0], to_child[1], true);
    channel->adopt_child(pid);
    return channel;
  }
  throw Error(ErrorCode::kConfig, "unknown endpoint '" + endpoint + "'");
}

int tcp_listen(const std::string& host, int port, int* bound_port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(ErrorCode::kConnection, "socket failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw Error(ErrorCode::kConfig, "listen host must be an IPv4 address");
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 4) != 0) {
    ::close(fd);
    throw Error(ErrorCode::kConnection, std::string("cannot listen: ") + std::strerror(errno));
  }
  if (bound_port != nullptr) {
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    *bound_port = ntohs(addr.sin_port);
  }
  return fd;
}

std::shared_ptr<FdChannel> tcp_accept(int listen_fd) {
  const int fd = ::accept(listen_fd, nullptr, nullptr);
  if (fd < 0) throw Error(ErrorCode::kConnection, std::string("accept failed: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_shared<FdChannel>(fd, fd, true);
}

}  // namespace corrsim
