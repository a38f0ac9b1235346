#pragma once

// External-policy bridge, protocol version 1.
//
// Framing: ASCII decimal byte length, '\n', then that many bytes of UTF-8
// JSON. Every message carries "v": 1 and a "type":
//   hello     {role, name}                         both directions, once
//   begin     {session, begin: {...}}              simulator -> policy
//   request   {id, session, task, step, prompt, reask, attachments, fields}
//   response  {id, text}                           policy -> simulator
//   error     {id, message}                        either direction
//   bye       {}                                   either direction
//
// All pixel coordinates on the wire (prompt text, structured fields, masks,
// exported images) are in the exported canvas frame; the simulator maps
// replies back to its native frame.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corrsim/export.hpp"
#include "corrsim/policy.hpp"
#include "corrsim/serialize.hpp"

namespace corrsim {

inline constexpr int kBridgeProtocolVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

std::string base64_encode(const std::string& bytes);
/// Throws ProtocolViolation on malformed input.
std::string base64_decode(const std::string& text);

std::string encode_frame(const std::string& payload);

/// Blocking byte channel over file descriptors (socket, pipe pair, stdio).
class FdChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool owns_fds);
  ~FdChannel();
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  /// Throws Connection when the peer is gone.
  void send(const Json& message);
  /// nullopt on a clean end of stream at a frame boundary. Throws Connection
  /// on a truncated frame and ProtocolViolation on bad framing or JSON.
  std::optional<Json> receive();
  void close();
  /// The channel waits for (and if needed terminates) this process on close.
  void adopt_child(int pid) { child_ = pid; }

 private:
  bool read_exact(char* buf, std::size_t n, bool eof_ok);

  int read_fd_;
  int write_fd_;
  bool owns_;
  int child_ = -1;
};

enum class MessageType { kHello, kBegin, kRequest, kResponse, kError, kBye };

std::string to_string(MessageType type);

struct Attachment {
  std::string kind;  ///< image | depth | mask | sidecar
  std::string path;  ///< local reference, or empty when inlined
  std::string data;  ///< raw bytes when inlined (base64 on the wire)

  friend bool operator==(const Attachment&, const Attachment&) = default;
};

struct BeginFields {
  Instruction instruction;
  Camera camera;  ///< native camera
  CanvasMapping mapping;
  std::uint64_t seed = 0;
  /// Ground-truth object; only sent when the simulator is configured to
  /// share it (reference responders).
  std::optional<std::string> object_asset;

  friend bool operator==(const BeginFields& a, const BeginFields& b) {
    return a.instruction.text == b.instruction.text &&
           a.instruction.primitive == b.instruction.primitive && a.camera == b.camera &&
           a.mapping == b.mapping && a.seed == b.seed && a.object_asset == b.object_asset;
  }
};

struct RequestFields {
  Primitive primitive = Primitive::kPull;
  std::string instruction;
  int attempt_index = 0;
  std::optional<Action> previous_action;
  std::optional<Action> proposed_action;
  std::optional<RotationFields> rotation;
  BoolGrid mask;  ///< accumulated mask layer, canvas frame

  friend bool operator==(const RequestFields& a, const RequestFields& b);
};

struct BridgeMessage {
  int version = kBridgeProtocolVersion;
  MessageType type = MessageType::kHello;
  std::uint64_t id = 0;
  std::string session;
  std::string role;  ///< hello: simulator | policy
  std::string name;  ///< hello
  BeginFields begin;
  TaskKind task = TaskKind::kPredict;
  int step = 0;
  std::string prompt;
  bool reask = false;
  std::vector<Attachment> attachments;
  RequestFields fields;
  std::string text;     ///< response
  std::string message;  ///< error

  friend bool operator==(const BridgeMessage&, const BridgeMessage&) = default;
};

Json encode_message(const BridgeMessage& message);
/// Throws ProtocolViolation on schema errors or a version mismatch.
BridgeMessage decode_message(const Json& json);

/// Rewrites every "(u, v)" in `text` shifted by (du, dv), canonical spacing.
std::string shift_pixels(const std::string& text, int du, int dv);

struct BridgeOptions {
  std::string name = "simulator";
  /// Observation files are written here and referenced by path; empty
  /// disables file attachments.
  std::filesystem::path export_dir;
  bool inline_attachments = false;
  int image_size = kDefaultExportSize;
  bool share_ground_truth = false;
};

/// A policy answered by a peer process.
class BridgePolicy : public Policy {
 public:
  BridgePolicy(std::shared_ptr<FdChannel> channel, BridgeOptions options);
  ~BridgePolicy() override;

  std::string name() const override { return "bridge"; }
  void begin_sample(const SampleContext& context) override;
  std::string respond(const PolicyRequest& request) override;

  const std::string& peer_name() const { return peer_name_; }

 private:
  BridgeMessage exchange(const BridgeMessage& request);
  void handshake();

  std::shared_ptr<FdChannel> channel_;
  BridgeOptions options_;
  std::string session_;
  CanvasMapping mapping_;
  std::uint64_t next_id_ = 1;
  bool greeted_ = false;
  std::string peer_name_;
};

/// Serves a local policy to a simulator until bye or end of stream. Requests
/// that cannot be answered produce an error message, not an exception.
/// Returns the number of requests answered.
std::size_t serve_bridge(FdChannel& channel, Policy& policy, const std::string& name = "corrsim");

/// Endpoints: "tcp://host:port" or "exec:<shell command>" (peer on its
/// stdin/stdout). Spawning a peer sets SIGPIPE to ignored for the process.
/// Throws Connection.
std::shared_ptr<FdChannel> connect_endpoint(const std::string& endpoint);

/// Listening socket bound to host:port (port 0 picks one). Returns the fd.
int tcp_listen(const std::string& host, int port, int* bound_port = nullptr);
/// Blocks for one connection on a listening fd.
std::shared_ptr<FdChannel> tcp_accept(int listen_fd);

}  // namespace corrsim
