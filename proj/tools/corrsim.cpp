// corrsim command line: bench-run, datagen, replay, bridge-serve.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "corrsim/asset.hpp"
#include "corrsim/bench.hpp"
#include "corrsim/bridge.hpp"
#include "corrsim/datagen.hpp"
#include "corrsim/error.hpp"
#include "corrsim/objects.hpp"

namespace fs = std::filesystem;
using namespace corrsim;

namespace {

constexpr int kExitQuarantine = 1;
constexpr int kExitError = 2;

struct BenchArgs {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out = "bench-out";
  std::string policy;
  double p_static = -1.0;
  double sigma_dir = -1.0;
  std::string endpoint;
  bool share_ground_truth = false;
  std::string export_dir;
  bool inline_attachments = false;
  int corrections = -1;
  bool no_position = false;
  bool no_rotation = false;
  bool tta = false;
  bool no_tta = false;
  int threads = -1;
  bool ablation = false;
};

int bench_run(const BenchArgs& a) {
  BenchConfig config;
  fs::path base;
  if (!a.config.empty()) {
    config = BenchConfig::load(a.config);
    base = fs::path(a.config).parent_path();
  }
  if (!a.seeds.empty()) config.seeds = a.seeds;
  if (!a.policy.empty()) config.policy.kind = a.policy;
  if (a.p_static >= 0) config.policy.p_static = a.p_static;
  if (a.sigma_dir >= 0) config.policy.sigma_dir = a.sigma_dir;
  if (!a.endpoint.empty()) config.policy.endpoint = a.endpoint;
  if (a.share_ground_truth) config.policy.share_ground_truth = true;
  if (!a.export_dir.empty()) config.policy.export_dir = a.export_dir;
  if (a.inline_attachments) config.policy.inline_attachments = true;
  if (a.corrections >= 0) config.corrections = a.corrections;
  if (a.no_position) config.position_correction = false;
  if (a.no_rotation) config.rotation_correction = false;
  if (a.tta) config.tta = true;
  if (a.no_tta) config.tta = false;
  if (a.threads >= 0) config.threads = a.threads;
  config.validate();
  const auto suite = load_suite(config, base);

  std::vector<std::pair<std::string, BenchConfig>> arms;
  if (a.ablation) {
    arms = ablation_arms(config);
  } else {
    arms.emplace_back("", config);
  }
  std::size_t quarantined = 0;
  for (const auto& [name, arm] : arms) {
    const BenchReport report = run_bench(arm, suite);
    const fs::path dir = name.empty() ? fs::path(a.out) : fs::path(a.out) / name;
    write_bench_outputs(report, dir);
    quarantined += report.quarantined;
    if (!name.empty()) std::cout << "== " << name << "\n";
    std::cout << table_text(report) << curve_csv(report);
    std::cout << "quarantined " << report.quarantined << ", policy failures " << report.policy_failures
              << ", " << report.runtime_seconds << " s\n";
  }
  return quarantined == 0 ? 0 : kExitQuarantine;
}

struct DatagenArgs {
  std::string config;
  std::string out = "corpus";
  int episodes = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int suite_count = 20;
  std::uint64_t suite_seed = 0;
  std::string family;
  std::vector<std::string> assets;
};

int datagen(const DatagenArgs& a) {
  DatagenConfig config;
  if (!a.config.empty()) config = DatagenConfig::from_json(Json::parse(read_text(a.config)));
  if (a.episodes >= 0) config.episodes = a.episodes;
  if (a.seed_set) config.seed = a.seed;
  std::vector<ArticulatedObject> objects;
  if (!a.assets.empty()) {
    for (const auto& p : a.assets) objects.push_back(load_asset(p));
  } else if (!a.family.empty()) {
    objects = family_suite(a.family, a.suite_count, a.suite_seed);
  } else {
    objects = builtin_suite(a.suite_count, a.suite_seed);
  }
  const CorpusSummary s = generate_corpus(objects, config, a.out);
  std::cout << "episodes " << s.episodes << ", records " << s.records << ", trials " << s.trials
            << ", config hash " << s.config_hash << "\n";
  return 0;
}

int replay(const std::string& path) {
  std::size_t sessions = 0;
  std::size_t bad = 0;
  for (const auto& j : read_jsonl(path)) {
    const SessionLog log = session_from_json(j);
    ++sessions;
    const auto mismatches = replay_session(log);
    for (const auto& m : mismatches) std::cout << "MISMATCH " << m << "\n";
    if (!mismatches.empty()) ++bad;
  }
  std::cout << "replayed " << sessions << " sessions, " << bad << " with mismatches\n";
  return bad == 0 ? 0 : kExitQuarantine;
}

struct ServeArgs {
  std::string listen;
  bool stdio = false;
  bool once = false;
  PolicySpec policy;
  std::uint64_t seed = 0;
};

int bridge_serve(ServeArgs a) {
  if (a.policy.kind == "bridge") throw Error(ErrorCode::kConfig, "bridge-serve needs a local policy");
  auto policy = make_policy(a.policy, a.seed);
  if (a.stdio || a.listen.empty()) {
    FdChannel channel(0, 1, false);
    serve_bridge(channel, *policy);
    return 0;
  }
  const auto colon = a.listen.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kConfig, "--listen expects host:port");
  int port = 0;
  const int fd = tcp_listen(a.listen.substr(0, colon), std::stoi(a.listen.substr(colon + 1)), &port);
  std::cerr << "listening on " << a.listen.substr(0, colon) << ":" << port << "\n";
  do {
    auto channel = tcp_accept(fd);
    try {
      const std::size_t n = serve_bridge(*channel, *policy);
      std::cerr << "session closed after " << n << " requests\n";
    } catch (const Error& e) {
      std::cerr << "session aborted: " << e.what() << "\n";
    }
  } while (!a.once);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"Articulated-object correction simulator"};
  app.require_subcommand(1);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench-run", "Run correction sessions over an object suite");
  b->add_option("-c,--config", bench.config, "Bench config JSON")->check(CLI::ExistingFile);
  b->add_option("-s,--seed", bench.seeds, "Seed (repeatable; overrides the config)");
  b->add_option("-o,--out", bench.out, "Output directory");
  b->add_option("--policy", bench.policy, "oracle | perturbed | learnable | bridge");
  b->add_option("--p-static", bench.p_static, "Perturbed policy: static-pixel probability");
  b->add_option("--sigma-dir", bench.sigma_dir, "Perturbed policy: direction noise (rad)");
  b->add_option("--endpoint", bench.endpoint, "Bridge endpoint: tcp://host:port or exec:<cmd>");
  b->add_flag("--share-ground-truth", bench.share_ground_truth, "Bridge: send the object to the peer");
  b->add_option("--export-dir", bench.export_dir, "Bridge: write observation files here");
  b->add_flag("--inline-attachments", bench.inline_attachments, "Bridge: embed observation files");
  b->add_option("-n,--corrections", bench.corrections, "Cap on corrections per session");
  b->add_flag("--no-position", bench.no_position, "Disable position correction");
  b->add_flag("--no-rotation", bench.no_rotation, "Disable rotation correction");
  b->add_flag("--tta", bench.tta, "Enable test-time adaptation");
  b->add_flag("--no-tta", bench.no_tta, "Disable test-time adaptation");
  b->add_option("--threads", bench.threads, "Worker threads (0 = all cores)");
  b->add_flag("--ablation", bench.ablation, "Run every ablation arm into subdirectories");

  DatagenArgs dg;
  auto* d = app.add_subcommand("datagen", "Generate the fine-tuning corpus");
  d->add_option("-c,--config", dg.config, "Datagen config JSON")->check(CLI::ExistingFile);
  d->add_option("-o,--out", dg.out, "Output directory");
  d->add_option("-e,--episodes", dg.episodes, "Successful episodes to collect");
  d->add_option("-s,--seed", dg.seed, "Sampling seed")->each([&](const std::string&) { dg.seed_set = true; });
  d->add_option("--suite-count", dg.suite_count, "Number of built-in objects");
  d->add_option("--suite-seed", dg.suite_seed, "Seed for the built-in objects");
  d->add_option("--family", dg.family, "Restrict to one object family");
  d->add_option("--asset", dg.assets, "Asset files (repeatable)")->check(CLI::ExistingFile);

  std::string replay_path;
  auto* r = app.add_subcommand("replay", "Re-execute logged sessions and compare bit for bit");
  r->add_option("sessions", replay_path, "sessions.jsonl")->required()->check(CLI::ExistingFile);

  ServeArgs serve;
  auto* s = app.add_subcommand("bridge-serve", "Serve a local policy over the bridge protocol");
  s->add_option("--listen", serve.listen, "host:port (port 0 picks one)");
  s->add_flag("--stdio", serve.stdio, "Serve on stdin/stdout");
  s->add_flag("--once", serve.once, "Exit after the first connection");
  s->add_option("--policy", serve.policy.kind, "oracle | perturbed | learnable");
  s->add_option("--p-static", serve.policy.p_static, "Perturbed policy: static-pixel probability");
  s->add_option("--sigma-dir", serve.policy.sigma_dir, "Perturbed policy: direction noise (rad)");
  s->add_option("--seed", serve.seed, "Learnable policy seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*b) return bench_run(bench);
    if (*d) return datagen(dg);
    if (*r) return replay(replay_path);
    if (*s) return bridge_serve(serve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
