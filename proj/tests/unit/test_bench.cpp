#include <filesystem>

#include "corrsim/asset.hpp"
#include "corrsim/bench.hpp"
#include "corrsim/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrsim;

namespace fs = std::filesystem;

namespace {

BenchConfig small(const std::string& policy = "oracle") {
  BenchConfig c;
  c.suite_count = 6;
  c.resolution = 32;
  c.seeds = {0, 1};
  c.policy.kind = policy;
  if (policy == "perturbed") {
    c.policy.p_static = 0.4;
    c.policy.sigma_dir = 0.6;
  }
  return c;
}

BenchReport hand_report() {
  BenchReport r;
  r.max_corrections = 1;
  r.per_object = {{"0:drawer", 3, 2}, {"1:door_long", 4, 4}};
  r.aggregate = {"ALL", 7, 6};
  r.curve = {3.0 / 7.0, 6.0 / 7.0};
  return r;
}

}  // namespace

TEST_CASE("tables are byte-stable") {
  const BenchReport r = hand_report();
  CHECK(table_csv(r) ==
        "object,sessions,successes,success_rate\n"
        "0:drawer,3,2,0.6667\n"
        "1:door_long,4,4,1.0000\n"
        "ALL,7,6,0.8571\n");
  CHECK(table_text(r) ==
        "object       sessions  successes  success_rate\n"
        "0:drawer            3          2        0.6667\n"
        "1:door_long         4          4        1.0000\n"
        "ALL                 7          6        0.8571\n");
  CHECK(curve_csv(r) == "corrections,success_rate\n0,0.4286\n1,0.8571\n");
}

TEST_CASE("an empty report gives header-only tables") {
  const BenchReport r;
  CHECK(table_csv(r) == "object,sessions,successes,success_rate\n");
  CHECK(table_text(r) == "object  sessions  successes  success_rate\n");
  CHECK(curve_csv(r) == "corrections,success_rate\n");
  CHECK(RateRow{}.rate() == 0.0);
}

TEST_CASE("config JSON round trip and validation") {
  BenchConfig c = small("perturbed");
  c.suite = "family";
  c.family = "microwave";
  c.corrections = 3;
  c.rotation_correction = false;
  c.tta = true;
  c.schedule = TtaSchedule{0.5, 1e-3, 0.5, 10};
  c.seeds = {3, 9, 27};
  c.episodes_per_object = 2;
  c.instruction = {"Push it.", Primitive::kPush};
  c.classify.mode = ClassifyMode::kAdjacentAngles;
  const BenchConfig back = BenchConfig::from_json(Json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());
  CHECK(back.schedule->decay_every == 10);
  CHECK(back.classify.mode == ClassifyMode::kAdjacentAngles);

  CHECK(BenchConfig::from_json(Json::object()).to_json() == BenchConfig().to_json());
  auto bad = [](Json j) {
    try {
      BenchConfig::from_json(j).validate();
    } catch (const Error& e) {
      return e.code() == ErrorCode::kConfig;
    }
    return false;
  };
  CHECK(bad({{"seeds", Json::array()}}));
  CHECK(bad({{"corrections", -1}}));
  CHECK(bad({{"suite", "everything"}}));
  CHECK(bad({{"policy", {{"kind", "psychic"}}}}));
  CHECK(bad({{"policy", {{"kind", "bridge"}}}}));
  CHECK(bad({{"corrections", "four"}}));
}

TEST_CASE("the oracle succeeds without corrections") {
  const BenchConfig c = small();
  const BenchReport r = run_bench(c, load_suite(c));
  CHECK(r.aggregate.sessions == 12);
  CHECK(r.curve.front() == 1.0);
  CHECK(r.curve.back() == 1.0);
  CHECK(r.quarantined == 0);
  CHECK(r.per_object.size() == 6);
  CHECK(r.per_seed.size() == 2);
  CHECK(r.per_object[0].name.rfind("0:", 0) == 0);
}

TEST_CASE("curves are cumulative and toggles off flatten them") {
  BenchConfig c = small("perturbed");
  c.episodes_per_object = 3;
  const auto suite = load_suite(c);
  const BenchReport full = run_bench(c, suite);
  REQUIRE(full.curve.size() == 5);
  for (std::size_t k = 1; k < full.curve.size(); ++k) CHECK(full.curve[k] >= full.curve[k - 1]);
  CHECK(full.curve.back() == doctest::Approx(full.aggregate.rate()));
  CHECK(full.curve.back() > full.curve.front());
  for (const auto& sc : full.per_seed_curve) {
    for (std::size_t k = 1; k < sc.size(); ++k) CHECK(sc[k] >= sc[k - 1]);
  }

  c.position_correction = false;
  c.rotation_correction = false;
  const BenchReport none = run_bench(c, suite);
  for (const auto& e : none.episodes) {
    REQUIRE(e.log);
    CHECK(e.log->corrections_used == 0);
    CHECK(e.log->stop_reason != "budget");
  }
  for (double v : none.curve) CHECK(v == none.curve.front());
  // Both arms see the same first attempt.
  CHECK(none.curve.front() == full.curve.front());
}

TEST_CASE("reports are deterministic and independent of thread count") {
  BenchConfig c = small("perturbed");
  const auto suite = load_suite(c);
  c.threads = 1;
  const Json a = report_to_json(run_bench(c, suite));
  c.threads = 4;
  const BenchReport r = run_bench(c, suite);
  CHECK(report_to_json(r) == a);
  CHECK(report_to_json(run_bench(c, suite)).dump() == a.dump());
  for (const auto& e : r.episodes) {
    REQUIRE(e.log);
    CHECK(replay_session(*e.log).empty());
  }
}

TEST_CASE("tampered logs fail replay") {
  BenchConfig c = small("perturbed");
  const BenchReport r = run_bench(c, load_suite(c));
  SessionLog log = *r.episodes.front().log;
  log.attempts.front().report.success = !log.attempts.front().report.success;
  CHECK_FALSE(replay_session(log).empty());
}

TEST_CASE("learnable policy with adaptation is deterministic") {
  BenchConfig c = small("learnable");
  c.suite = "family";
  c.family = "drawer_cabinet";
  c.suite_count = 5;
  c.tta = true;
  const auto suite = load_suite(c);
  CHECK(report_to_json(run_bench(c, suite)) == report_to_json(run_bench(c, suite)));
}

TEST_CASE("ablation arms differ only in their toggles") {
  BenchConfig c = small("perturbed");
  auto arms = ablation_arms(c);
  REQUIRE(arms.size() == 4);
  CHECK(arms[0].first == "full");
  CHECK(arms[3].first == "none");
  const Json base = c.to_json();
  for (const auto& [name, arm] : arms) {
    Json j = arm.to_json();
    j["toggles"] = base["toggles"];
    CHECK_MESSAGE(j == base, name);
  }
  CHECK_FALSE(arms[1].second.position_correction);
  CHECK(arms[1].second.rotation_correction);
  CHECK(arms[2].second.position_correction);
  CHECK_FALSE(arms[2].second.rotation_correction);
  c.tta = true;
  arms = ablation_arms(c);
  REQUIRE(arms.size() == 5);
  CHECK(arms[4].first == "wo_tta");
  CHECK_FALSE(arms[4].second.tta);
}

TEST_CASE("broken policies quarantine episodes") {
  BenchConfig c = small();
  c.policy.kind = "bridge";
  c.policy.endpoint = "exec:exit 0";
  const BenchReport r = run_bench(c, load_suite(c));
  CHECK(r.quarantined == r.episodes.size());
  CHECK(r.aggregate.sessions == 0);
  CHECK(r.curve.front() == 0.0);
  for (const auto& e : r.episodes) {
    CHECK(e.quarantined);
    CHECK_FALSE(e.error.empty());
    CHECK_FALSE(e.log);
  }
}

TEST_CASE("bench output files") {
  const fs::path dir = fs::temp_directory_path() / "corrsim-bench-test";
  fs::remove_all(dir);
  BenchConfig c = small("perturbed");
  const BenchReport r = run_bench(c, load_suite(c));
  write_bench_outputs(r, dir);
  for (const char* f : {"report.json", "sessions.jsonl", "quarantine.jsonl", "timing.json", "table.csv",
                        "table.txt", "curve.csv"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  const Json report = Json::parse(read_text(dir / "report.json"));
  CHECK(report.at("format") == "corrsim-bench-report");
  CHECK(report == report_to_json(r));
  CHECK_FALSE(report.dump().find("runtime") != std::string::npos);
  const auto sessions = read_jsonl(dir / "sessions.jsonl");
  REQUIRE(sessions.size() == r.episodes.size());
  CHECK(session_from_json(sessions[0]) == *r.episodes[0].log);
  CHECK(read_text(dir / "table.csv") == table_csv(r));
  CHECK(read_jsonl(dir / "quarantine.jsonl").empty());
  fs::remove_all(dir);
}

TEST_CASE("suites") {
  BenchConfig c;
  c.suite = "family";
  c.family = "no_such_family";
  CHECK_THROWS_AS(load_suite(c), Error);
  const fs::path dir = fs::temp_directory_path() / "corrsim-suite-test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_asset(test::drawer_object(), dir / "d.asset");
  c.suite = "assets";
  c.asset_paths = {"d.asset"};
  const auto suite = load_suite(c, dir);
  REQUIRE(suite.size() == 1);
  CHECK(suite[0].parts().size() == test::drawer_object().parts().size());
  c.asset_paths = {"missing.asset"};
  CHECK_THROWS_AS(load_suite(c, dir), Error);
  fs::remove_all(dir);
}

TEST_CASE("ablation arms diverge from the full arm only at disabled corrections") {
  BenchConfig c = small("perturbed");
  c.episodes_per_object = 4;
  const auto suite = load_suite(c);
  std::vector<BenchReport> reports;
  for (const auto& [name, arm] : ablation_arms(c)) reports.push_back(run_bench(arm, suite));
  const CorrectionKind disabled[] = {CorrectionKind::kNone, CorrectionKind::kPosition, CorrectionKind::kRotation};
  int identical = 0;
  for (std::size_t i = 0; i < reports[0].episodes.size(); ++i) {
    const SessionLog& full = *reports[0].episodes[i].log;
    for (std::size_t a = 1; a < 4; ++a) {
      const SessionLog& log = *reports[a].episodes[i].log;
      REQUIRE_FALSE(log.attempts.empty());
      CHECK(log.attempts.front() == full.attempts.front());
      bool full_uses_disabled = false;
      for (const auto& at : full.attempts) {
        const bool off = a == 3 ? at.correction_kind != CorrectionKind::kNone : at.correction_kind == disabled[a];
        full_uses_disabled = full_uses_disabled || off;
      }
      for (const auto& at : log.attempts) {
        if (a == 3) CHECK(at.correction_kind == CorrectionKind::kNone);
        else CHECK(at.correction_kind != disabled[a]);
      }
      if (full.final_success && !full_uses_disabled) {
        CHECK(log == full);
        ++identical;
      }
    }
  }
  CHECK(identical > 0);
}
