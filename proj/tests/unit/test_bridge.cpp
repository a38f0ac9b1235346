#include <sys/socket.h>
#include <unistd.h>

#include <random>
#include <thread>

#include "corrsim/asset.hpp"
#include "corrsim/bench.hpp"
#include "corrsim/bridge.hpp"
#include "corrsim/error.hpp"
#include "corrsim/objects.hpp"
#include "corrsim/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrsim;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidParams;
}

/// Channel whose read side is fed the given raw bytes.
std::optional<Json> receive_raw(const std::string& bytes) {
  int fds[2];
  REQUIRE(::pipe(fds) == 0);
  REQUIRE(::write(fds[1], bytes.data(), bytes.size()) == static_cast<ssize_t>(bytes.size()));
  ::close(fds[1]);
  FdChannel ch(fds[0], -1, true);
  return ch.receive();
}

struct SocketPair {
  std::shared_ptr<FdChannel> simulator;
  std::shared_ptr<FdChannel> peer;
  SocketPair() {
    int sv[2];
    REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) == 0);
    simulator = std::make_shared<FdChannel>(sv[0], sv[0], true);
    peer = std::make_shared<FdChannel>(sv[1], sv[1], true);
  }
};

/// Answers the handshake, then hangs up after reading `requests` requests.
void hang_up_after(FdChannel& ch, int requests) {
  int seen = 0;
  while (auto raw = ch.receive()) {
    const BridgeMessage m = decode_message(*raw);
    if (m.type == MessageType::kHello) {
      BridgeMessage hello;
      hello.type = MessageType::kHello;
      hello.role = "policy";
      hello.name = "flaky";
      ch.send(encode_message(hello));
    }
    if (m.type == MessageType::kRequest && ++seen >= requests) break;
  }
  ch.close();
}

}  // namespace

TEST_CASE("base64 test vectors") {
  const std::pair<const char*, const char*> vectors[] = {{"", ""},         {"f", "Zg=="},
                                                         {"fo", "Zm8="},   {"foo", "Zm9v"},
                                                         {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="},
                                                         {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, encoded] : vectors) {
    CHECK(base64_encode(plain) == encoded);
    CHECK(base64_decode(encoded) == plain);
  }
  std::mt19937_64 rng(2);
  for (int n = 0; n < 64; ++n) {
    std::string bytes(static_cast<std::size_t>(n), '\0');
    for (auto& c : bytes) c = static_cast<char>(rng() & 0xff);
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK(code_of([] { base64_decode("Zm9"); }) == ErrorCode::kProtocolViolation);
  CHECK(code_of([] { base64_decode("Zm!v"); }) == ErrorCode::kProtocolViolation);
}

TEST_CASE("framing") {
  CHECK(encode_frame("abc") == "3\nabc");
  CHECK(receive_raw("") == std::nullopt);
  CHECK(*receive_raw("7\n{\"a\":1}") == Json{{"a", 1}});
  CHECK(code_of([] { receive_raw("9\n{\"a\""); }) == ErrorCode::kConnection);
  CHECK(code_of([] { receive_raw("3"); }) == ErrorCode::kConnection);
  CHECK(code_of([] { receive_raw("x\n{}"); }) == ErrorCode::kProtocolViolation);
  CHECK(code_of([] { receive_raw("\n{}"); }) == ErrorCode::kProtocolViolation);
  CHECK(code_of([] { receive_raw("99999999999\n"); }) == ErrorCode::kProtocolViolation);
  CHECK(code_of([] { receive_raw("1000000000\n"); }) == ErrorCode::kProtocolViolation);
  CHECK(code_of([] { receive_raw("3\n{]!"); }) == ErrorCode::kProtocolViolation);

  SocketPair p;
  p.simulator->send(Json{{"x", 1}});
  p.simulator->send(Json{{"y", "two"}});
  CHECK(*p.peer->receive() == Json{{"x", 1}});
  CHECK(*p.peer->receive() == Json{{"y", "two"}});
}

TEST_CASE("writing to a departed exec peer is a connection error") {
  auto ch = connect_endpoint("exec:exit 0");
  CHECK(code_of([&] {
    for (int i = 0; i < 1000; ++i) ch->send(Json{{"pad", std::string(4096, 'x')}});
  }) == ErrorCode::kConnection);
  CHECK(code_of([] { connect_endpoint("udp://x"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { connect_endpoint("tcp://127.0.0.1:1"); }) == ErrorCode::kConnection);
}

TEST_CASE("messages round trip through JSON text") {
  std::mt19937_64 rng(12);
  const auto obj = test::door_object();
  for (int i = 0; i < 300; ++i) {
    BridgeMessage m;
    m.type = static_cast<MessageType>(i % 6);
    switch (m.type) {
      case MessageType::kHello:
        m.role = i % 2 ? "policy" : "simulator";
        m.name = "peer " + std::to_string(i);
        break;
      case MessageType::kBegin:
        m.session = "s" + std::to_string(i);
        m.begin.instruction = {"Open it " + std::to_string(i), i % 4 ? Primitive::kPull : Primitive::kPush};
        m.begin.camera = default_camera(obj, 16 + i % 7, uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
        m.begin.mapping = canvas_mapping(m.begin.camera.width, m.begin.camera.height, 336);
        m.begin.seed = rng();
        if (i % 3 == 0) m.begin.object_asset = write_asset(obj);
        break;
      case MessageType::kRequest: {
        m.id = rng() >> 12;
        m.session = "s";
        m.task = static_cast<TaskKind>(i % 3);
        m.step = i % 6;
        m.prompt = "Is (1, 2) \"quoted\"?\n";
        m.reask = i % 2 == 0;
        m.attachments.push_back({"image", "/tmp/a.ppm", ""});
        std::string bytes(40, '\0');
        for (auto& c : bytes) c = static_cast<char>(rng() & 0xff);
        m.attachments.push_back({"depth", "", bytes});
        m.fields.primitive = Primitive::kPull;
        m.fields.instruction = "Open";
        m.fields.attempt_index = i % 5;
        if (i % 2) m.fields.previous_action = Action{{3, 4}, test::random_unit(rng), Primitive::kPull};
        if (i % 3) m.fields.proposed_action = Action{{5, 6}, test::random_unit(rng), Primitive::kPush};
        if (i % 4) {
          m.fields.rotation = RotationFields{i % 8 < 4 ? EstimatedKind::kRevolute : EstimatedKind::kPrismatic,
                                             test::random_unit(rng), {7, 8}, test::random_unit(rng),
                                             test::random_unit(rng)};
        }
        m.fields.mask = BoolGrid(5, 4, 0);
        for (std::size_t k = 0; k < m.fields.mask.size(); ++k) m.fields.mask.data()[k] = rng() & 1;
        break;
      }
      case MessageType::kResponse:
        m.id = rng() >> 12;
        m.text = "(1, 2) [3, 4, 5]";
        break;
      case MessageType::kError:
        m.id = rng() >> 12;
        m.message = "no";
        break;
      case MessageType::kBye:
        break;
    }
    const BridgeMessage back = decode_message(Json::parse(encode_message(m).dump()));
    CHECK(back == m);
  }
  CHECK(code_of([] { decode_message(Json{{"v", 2}, {"type", "bye"}}); }) == ErrorCode::kProtocolViolation);
  CHECK(code_of([] { decode_message(Json{{"v", 1}, {"type", "wave"}}); }) == ErrorCode::kProtocolViolation);
  CHECK(code_of([] { decode_message(Json{{"v", 1}, {"type", "response"}}); }) ==
        ErrorCode::kProtocolViolation);
  CHECK(code_of([] { decode_message(Json::array()); }) == ErrorCode::kProtocolViolation);
}

TEST_CASE("pixel shifting in text") {
  CHECK(shift_pixels("go to (1, 2) and (3,4) [5, 6, 7]", 10, 20) == "go to (11, 22) and (13, 24) [5, 6, 7]");
  CHECK(shift_pixels("( -5 , 0 )", 5, 0) == "(0, 0)");
  CHECK(shift_pixels("no pixels", 1, 1) == "no pixels");
}

TEST_CASE("a served oracle reproduces the local oracle session") {
  for (const auto& obj : builtin_suite(6, 3)) {
    const Camera cam = default_camera(obj, 48, 0.1, -0.05);
    OraclePolicy local;
    const SessionLog expected = run_session(obj, cam, local, {}, {}, "x", 5);

    SocketPair p;
    std::thread server([&] {
      OraclePolicy served;
      serve_bridge(*p.peer, served);
    });
    SessionLog got;
    {
      BridgeOptions opts;
      opts.share_ground_truth = true;
      BridgePolicy bridge(p.simulator, opts);
      got = run_session(obj, cam, bridge, {}, {}, "x", 5);
      CHECK(bridge.peer_name() == "corrsim");
    }
    p.simulator->close();
    server.join();
    CHECK_MESSAGE(got == expected, obj.name());
  }
}

TEST_CASE("a served perturbed policy works from the depth attachment alone") {
  const auto obj = test::drawer_object();
  const Camera cam = default_camera(obj, 32);
  SocketPair p;
  std::size_t answered = 0;
  std::vector<std::string> prompts;
  std::thread server([&] {
    test::ScriptedPolicy scripted([&](const PolicyRequest& r, int) -> std::string {
      prompts.push_back(r.prompt);
      CHECK(r.observation->part_id.width() == 64);
      CHECK(r.observation->part_id[{32, 32}] == 0);
      return "(30, 30) [99, 50, 50]";
    });
    answered = serve_bridge(*p.peer, scripted);
  });
  BridgeOptions opts;
  opts.inline_attachments = true;
  opts.image_size = 64;
  {
    BridgePolicy bridge(p.simulator, opts);
    const SampleContext ctx{"a", &obj, cam, {}, 1};
    bridge.begin_sample(ctx);
    const Observation obs = render(obj, cam);
    PolicyRequest req;
    req.observation = &obs;
    req.prompt = "Look at (1, 2).";
    CHECK(bridge.respond(req) == "(14, 14) [99, 50, 50]");
  }
  p.simulator->close();
  server.join();
  CHECK(answered == 1);
  REQUIRE(prompts.size() == 1);
  CHECK(prompts[0] == "Look at (17, 18).");
}

TEST_CASE("garbage replies become a policy failure in the log") {
  const auto obj = test::door_object();
  SocketPair p;
  std::thread server([&] {
    test::ScriptedPolicy garbage([](const PolicyRequest&, int) { return std::string("I would rather not."); });
    serve_bridge(*p.peer, garbage);
  });
  SessionLog log;
  {
    BridgeOptions opts;
    opts.share_ground_truth = true;
    BridgePolicy bridge(p.simulator, opts);
    log = run_session(obj, default_camera(obj, 32), bridge, {}, {}, "g", 1);
  }
  p.simulator->close();
  server.join();
  REQUIRE(log.error);
  CHECK(log.stop_reason == "policy_failure");
  CHECK(log.error->find("PolicyFailure") != std::string::npos);
}

TEST_CASE("server errors and hang-ups raise") {
  const auto obj = test::door_object();
  const Camera cam = default_camera(obj, 32);
  {
    // Without ground truth or attachments the server cannot answer.
    SocketPair p;
    OraclePolicy served;
    std::thread server([&] { serve_bridge(*p.peer, served); });
    {
      BridgePolicy bridge(p.simulator, {});
      CHECK(code_of([&] { run_session(obj, cam, bridge, {}, {}, "e", 1); }) == ErrorCode::kProtocolViolation);
    }
    p.simulator->close();
    server.join();
  }
  {
    SocketPair p;
    std::thread server([&] { hang_up_after(*p.peer, 1); });
    BridgePolicy bridge(p.simulator, {});
    CHECK(code_of([&] { run_session(obj, cam, bridge, {}, {}, "h", 1); }) == ErrorCode::kConnection);
    server.join();
  }
}

TEST_CASE("bench over tcp: served oracle matches, hang-ups are quarantined") {
  BenchConfig local;
  local.suite_count = 4;
  local.resolution = 32;
  local.seeds = {0, 1};
  const auto suite = load_suite(local);
  const BenchReport expected = run_bench(local, suite);

  int port = 0;
  const int listen_fd = tcp_listen("127.0.0.1", 0, &port);
  BenchConfig remote = local;
  remote.policy.kind = "bridge";
  remote.policy.endpoint = "tcp://127.0.0.1:" + std::to_string(port);
  remote.policy.share_ground_truth = true;
  {
    std::thread server([&] {
      auto ch = tcp_accept(listen_fd);
      OraclePolicy served;
      serve_bridge(*ch, served);
    });
    const BenchReport got = run_bench(remote, suite);
    server.join();
    CHECK(got.quarantined == 0);
    REQUIRE(got.episodes.size() == expected.episodes.size());
    for (std::size_t i = 0; i < got.episodes.size(); ++i) {
      REQUIRE(got.episodes[i].log);
      CHECK(*got.episodes[i].log == *expected.episodes[i].log);
    }
    CHECK(got.curve == expected.curve);
  }
  {
    std::thread server([&] {
      auto ch = tcp_accept(listen_fd);
      hang_up_after(*ch, 1);
    });
    const BenchReport got = run_bench(remote, suite);
    server.join();
    CHECK(got.quarantined == got.episodes.size());
    for (const auto& e : got.episodes) {
      if (e.quarantined) CHECK(e.error.find("Connection") != std::string::npos);
    }
  }
  ::close(listen_fd);
}
