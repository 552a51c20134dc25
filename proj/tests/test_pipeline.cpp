#include <sys/wait.h>

#include <algorithm>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "valuelens/pipeline.hpp"

using namespace valuelens;
using namespace valuelens::pipeline;
using testing::TempDir;

namespace {

// Copies the end-to-end fixture so that its relative workdir lands in `dir`.
fs::path stage_fixture(const TempDir& dir) {
  fs::copy(testing::fixture("e2e"), dir.path(), fs::copy_options::recursive);
  return dir / "config.json";
}

json config_json(const TempDir& dir) { return json::parse(testing::read_text(dir / "config.json")); }

bool any_contains(const std::vector<std::string>& v, const std::string& s) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& m) { return m.find(s) != std::string::npos; });
}

std::string fixed_clock() { return "2024-01-01T00:00:00Z"; }

RunOptions with_client(annotator::GlmClient* client) {
  RunOptions o;
  o.client = client;
  o.clock = fixed_clock;
  return o;
}

std::unique_ptr<annotator::MockGlmClient> fixture_client() {
  return annotator::MockGlmClient::from_fixture_file(testing::fixture("e2e") / "mock_glm.json");
}

std::set<std::string> lines_of(const fs::path& p) {
  std::set<std::string> out;
  std::istringstream is(testing::read_text(p));
  for (std::string line; std::getline(is, line);) out.insert(line);
  return out;
}

struct CliResult {
  int code;
  std::string out;
};

CliResult cli(const std::string& args, const TempDir& dir) {
  const std::string out = (dir / "cli_stdout.txt").string();
  const std::string cmd = std::string("\"") + VALUELENS_CLI + "\" " + args + " > \"" + out + "\" 2> \"" +
                          (dir / "cli_stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::read_text(out)};
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("shipped configs validate") {
    const auto root = testing::source_dir().parent_path();
    CHECK(config_errors(json::parse(testing::read_text(root / "config" / "example_run.json")), root / "config").empty());
    CHECK(config_errors(json::parse(testing::read_text(testing::fixture("e2e") / "config.json")), testing::fixture("e2e")).empty());
  }

  TEST_CASE("config problems are aggregated") {
    TempDir dir;
    stage_fixture(dir);
    auto j = config_json(dir);
    j["sample"]["rates"].erase("3");
    auto errors = config_errors(j, dir.path());
    REQUIRE(errors.size() == 1);
    CHECK(errors[0] == "sample.rates: missing tier 3");

    j["task"] = "4class";
    j["paths"]["corpus"] = "missing.jsonl";
    errors = config_errors(j, dir.path());
    CHECK(errors.size() == 3);
    CHECK(any_contains(errors, "task"));
    CHECK(any_contains(errors, "missing.jsonl"));
    CHECK_THROWS_AS(parse_config(j, dir.path()), ValidationError);

    j = config_json(dir);
    j["seeds"].erase("train");
    j["surprise"] = 1;
    errors = config_errors(j, dir.path());
    CHECK(any_contains(errors, "seeds.train"));
    CHECK(any_contains(errors, "unknown key 'surprise'"));
  }

  TEST_CASE("annotate before sample names the missing stage") {
    TempDir dir;
    const auto cfg = load_config(stage_fixture(dir));
    auto client = fixture_client();
    try {
      run_pipeline(cfg, {"annotate"}, with_client(client.get()));
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("'sample'") != std::string::npos);
    }
    CHECK(client->calls() == 0);
    CHECK_THROWS_AS(run_pipeline(cfg, {"bogus"}), ValidationError);
  }

  TEST_CASE("end-to-end run, manifests and rerun") {
    TempDir dir;
    const auto cfg = load_config(stage_fixture(dir));
    auto client = fixture_client();
    const auto first = run_pipeline(cfg, stage_names(), with_client(client.get()));
    REQUIRE(first.size() == stage_names().size());
    for (const auto& s : first) CHECK_FALSE(s.skipped);
    CHECK(first[3].details["failed"] == 0);
    CHECK(first[3].details["done"] == 100);
    CHECK(client->calls() == 100);
    CHECK(first.back().details["n_records"] == 100);
    CHECK(first[7].details["macro_f1"].get<double>() >= 0.95);

    for (const auto& stage : stage_names()) {
      const auto m = json::parse(testing::read_text(cfg.workdir / stage / "manifest.json"));
      CHECK(m["stage"] == stage);
      CHECK(m["version"] == std::string(kVersion));
      for (const char* key : {"inputs", "params", "outputs", "started_at", "finished_at"}) CHECK(m.contains(key));
      for (const auto& [name, entry] : m["outputs"].items()) {
        CHECK(fs::is_regular_file(cfg.workdir / entry["path"].get<std::string>()));
        CHECK(entry["sha256"].get<std::string>().size() == 64);
      }
    }

    auto again = fixture_client();
    const auto second = run_pipeline(cfg, stage_names(), with_client(again.get()));
    for (const auto& s : second) CHECK(s.skipped);
    CHECK(again->calls() == 0);

    // A changed parameter reruns that stage and everything fed by its outputs.
    auto changed = cfg;
    changed.train.epochs = 5;
    const auto third = run_pipeline(changed, stage_names(), with_client(again.get()));
    CHECK(third[5].skipped);
    CHECK_FALSE(third[6].skipped);
    CHECK(again->calls() == 0);
  }

  TEST_CASE("two runs with the same seeds produce identical artifacts") {
    TempDir a, b;
    const auto cfg_a = load_config(stage_fixture(a));
    const auto cfg_b = load_config(stage_fixture(b));
    auto ca = fixture_client();
    auto cb = fixture_client();
    run_pipeline(cfg_a, stage_names(), with_client(ca.get()));
    run_pipeline(cfg_b, stage_names(), with_client(cb.get()));
    for (const char* rel : {"ingest/sentences.jsonl", "ingest/ingest_report.json", "filter/matches.jsonl",
                            "sample/sample_ids.txt", "annotate/annotations.jsonl", "annotate/cost_estimate.json",
                            "eval-rationales/diversity.json", "topics/topics.json", "train/model.json",
                            "train/split.json", "train/train_report.json", "eval/eval_report.json",
                            "predict/predictions.jsonl"}) {
      INFO(rel);
      CHECK(testing::read_text(cfg_a.workdir / rel) == testing::read_text(cfg_b.workdir / rel));
    }
    // The cache journal records completion order, which concurrency may permute.
    CHECK(lines_of(cfg_a.workdir / "annotate/journal.jsonl") == lines_of(cfg_b.workdir / "annotate/journal.jsonl"));
  }

  TEST_CASE("failed annotations leave no manifest and are retried") {
    TempDir dir;
    const auto cfg = load_config(stage_fixture(dir));
    run_pipeline(cfg, {"ingest", "filter", "sample"});
    const auto ids = keywords::read_ids(cfg.workdir / "sample" / "sample_ids.txt");
    auto fx = json::parse(testing::read_text(dir / "mock_glm.json"));
    fx["fail_ids"] = {ids[0]};
    auto flaky = annotator::MockGlmClient::from_fixture(fx);
    auto cfg_fast = cfg;
    cfg_fast.glm.retry.base_backoff_s = 0.0;
    const auto r = run_pipeline(cfg_fast, {"annotate"}, with_client(flaky.get()));
    CHECK(r[0].details["failed"] == 1);
    CHECK_FALSE(fs::exists(cfg.workdir / "annotate" / "manifest.json"));
    auto good = fixture_client();
    const auto retry = run_pipeline(cfg_fast, {"annotate"}, with_client(good.get()));
    CHECK(retry[0].details["failed"] == 0);
    CHECK(retry[0].details["cached"] == 99);
    CHECK(good->calls() == 1);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    TempDir dir;
    const auto root = testing::source_dir().parent_path();
    CHECK(cli("validate-config \"" + (root / "config" / "example_run.json").string() + "\"", dir).code == 0);
    testing::write_text(dir / "bad.json", R"({"paths": {}, "task": "3class"})");
    const auto bad = cli("validate-config \"" + (dir / "bad.json").string() + "\"", dir);
    CHECK(bad.code == 1);
    CHECK(json::parse(bad.out)["errors"].size() >= 3);
    CHECK(cli("--no-such-flag", dir).code == 1);
    CHECK(cli("ingest --input /nonexistent.jsonl --out x.jsonl", dir).code == 1);
    CHECK(cli("run", dir).code == 1);
  }

  TEST_CASE("prompt subcommand prints the golden messages") {
    TempDir dir;
    const auto r = cli("prompt --sentence \"The system reduces the risk of data breaches for hospital patients.\"", dir);
    CHECK(r.code == 0);
    CHECK(r.out == testing::read_text(testing::source_dir() / "golden" / "default_prompt.json"));
  }

  TEST_CASE("run and rerun through the command line") {
    TempDir dir;
    const auto config = stage_fixture(dir);
    const auto first = cli("-q --config \"" + config.string() + "\" run", dir);
    REQUIRE(first.code == 0);
    for (const auto& s : json::parse(first.out)) CHECK(s["status"] == "ran");
    const auto second = cli("-q --config \"" + config.string() + "\" run", dir);
    REQUIRE(second.code == 0);
    for (const auto& s : json::parse(second.out)) CHECK(s["status"] == "skipped");
    const auto forced = cli("-q --config \"" + config.string() + "\" run --stages predict --force", dir);
    CHECK(json::parse(forced.out)[0]["status"] == "ran");
  }

  TEST_CASE("annotate exits 2 when any item fails") {
    TempDir dir;
    stage_fixture(dir);
    const auto d = [&](const char* n) { return "\"" + (dir / n).string() + "\""; };
    REQUIRE(cli("ingest --input " + d("documents.jsonl") + " --out " + d("s.jsonl"), dir).code == 0);
    testing::write_text(dir / "ids.txt", "E2E000:abstract:00000\nE2E000:abstract:00001\n");
    testing::write_text(dir / "flaky.json",
                        R"({"default_label": "NO_PVE", "garbage_ids": ["E2E000:abstract:00001"]})");
    const auto r = cli("-q annotate --sample " + d("ids.txt") + " --corpus " + d("s.jsonl") + " --out " +
                           d("a.jsonl") + " --mock " + d("flaky.json"),
                       dir);
    CHECK(r.code == 2);
    CHECK(annotator::read_annotations(dir / "a.jsonl").size() == 1);
  }

  TEST_CASE("predict resume beyond existing output is a runtime error") {
    TempDir dir;
    const auto config = stage_fixture(dir);
    REQUIRE(cli("-q --config \"" + config.string() + "\" run --stages ingest,filter,sample,annotate,train", dir).code == 0);
    const auto work = dir / "work";
    testing::write_text(dir / "p.jsonl", "");
    const auto r = cli("predict --model \"" + (work / "train" / "model.json").string() + "\" --corpus \"" +
                           (work / "ingest" / "sentences.jsonl").string() + "\" --out \"" +
                           (dir / "p.jsonl").string() + "\" --resume-from 5",
                       dir);
    CHECK(r.code == 2);
  }
}
