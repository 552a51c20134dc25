#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "support.hpp"
#include "valuelens/annotator.hpp"

using namespace valuelens;
using namespace valuelens::annotator;
using testing::TempDir;

namespace {

json rules_fixture() {
  return json{{"rules", json::array({json{{"contains", "safety"}, {"label", "D_PVE"}},
                                     json{{"contains", "harm"}, {"label", "C_PVE"}}})},
              {"default_label", "NO_PVE"}};
}

GlmConfig quick_config(int concurrency = 4) {
  GlmConfig cfg;
  cfg.model = "mock-model";
  cfg.max_concurrent = concurrency;
  return cfg;
}

std::vector<BatchItem> numbered_items(std::size_t n) {
  std::vector<BatchItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "D:abstract:%05zu", i);
    items.push_back({id, "Sentence number " + std::to_string(i) + (i % 2 ? " improves safety." : " is a gear.")});
  }
  return items;
}

}  // namespace

TEST_SUITE("annotator") {
  TEST_CASE("response parsing takes the last categorization line") {
    auto p = parse_response("Thinking... Based on these considerations, I would categorize this sentence as: Direct PVE.");
    CHECK(p.label == Label::d_pve);
    p = parse_response("categorize this sentence as: No PVE\nlater: I would categorize this sentence as: **Contextual PVE**");
    CHECK(p.label == Label::c_pve);
    CHECK(try_parse_response("I would categorize this sentence as: NO-PVE")->label == Label::no_pve);
    CHECK_FALSE(try_parse_response("This is a sentence about gears."));
    CHECK_FALSE(try_parse_response("categorize this sentence as: something else"));
    CHECK_THROWS_AS(parse_response("nothing"), UnparseableError);
  }

  TEST_CASE("mock rules drive labels") {
    auto client = MockGlmClient::from_fixture(rules_fixture());
    AnnotationCache cache;
    Annotator ann(framework::default_framework(), *client, quick_config(), cache);
    CHECK(ann.annotate("a", "It improves Safety.").label == Label::d_pve);
    CHECK(ann.annotate("b", "It may harm people.").label == Label::c_pve);
    CHECK(ann.annotate("c", "A gear turns.").label == Label::no_pve);
    CHECK(client->calls() == 3);
  }

  TEST_CASE("mock fixture with unknown label is rejected") {
    CHECK_THROWS_AS(MockGlmClient::from_fixture(json{{"rules", json::array({json{{"contains", "x"}, {"label", "MAYBE"}}})}}),
                    ValidationError);
  }

  TEST_CASE("cache hit makes zero calls and survives reload") {
    TempDir dir;
    auto client = MockGlmClient::from_fixture(rules_fixture());
    Annotation first;
    {
      AnnotationCache cache(dir / "cache.jsonl");
      Annotator ann(framework::default_framework(), *client, quick_config(), cache);
      ann.set_clock([] { return std::string("2024-01-01T00:00:00Z"); });
      first = ann.annotate("a", "It improves safety.");
    }
    CHECK(client->calls() == 1);
    AnnotationCache cache(dir / "cache.jsonl");
    CHECK(cache.size() == 1);
    Annotator ann(framework::default_framework(), *client, quick_config(), cache);
    bool hit = false;
    CHECK(ann.annotate("a", "It improves safety.", &hit) == first);
    CHECK(hit);
    CHECK(client->calls() == 1);
    CHECK(first.prompt_hash ==
          framework::prompt_hash("mock-model", framework::assemble_prompt(framework::default_framework(), "It improves safety.")));
  }

  TEST_CASE("identical sentences share a cache entry but keep their own ids") {
    auto client = MockGlmClient::from_fixture(rules_fixture());
    AnnotationCache cache;
    Annotator ann(framework::default_framework(), *client, quick_config(), cache);
    const auto a = ann.annotate("doc1:abstract:00000", "It improves safety.");
    bool hit = false;
    const auto b = ann.annotate("doc2:abstract:00003", "It improves safety.", &hit);
    CHECK(hit);
    CHECK(client->calls() == 1);
    CHECK(a.sent_id == "doc1:abstract:00000");
    CHECK(b.sent_id == "doc2:abstract:00003");
    CHECK(b.label == a.label);
    CHECK(b.prompt_hash == a.prompt_hash);
  }

  TEST_CASE("different model is a cache miss") {
    auto client = MockGlmClient::from_fixture(rules_fixture());
    AnnotationCache cache;
    Annotator a(framework::default_framework(), *client, quick_config(), cache);
    a.annotate("a", "x");
    auto cfg = quick_config();
    cfg.model = "other";
    Annotator b(framework::default_framework(), *client, cfg, cache);
    b.annotate("a", "x");
    CHECK(client->calls() == 2);
  }

  TEST_CASE("unparseable answer is re-asked once then reported") {
    auto client = MockGlmClient::from_fixture(json{{"garbage_ids", {"g"}}});
    AnnotationCache cache;
    Annotator ann(framework::default_framework(), *client, quick_config(), cache);
    try {
      ann.annotate("g", "text");
      FAIL("expected an error");
    } catch (const UnparseableError& e) {
      CHECK(e.sent_id() == "g");
      CHECK(e.raw().find("sensors") != std::string::npos);
    }
    CHECK(client->calls() == 2);
    CHECK(cache.size() == 0);
  }

  TEST_CASE("re-ask recovers and keeps the original prompt hash") {
    std::atomic<int> n{0};
    MockGlmClient client([&](const std::string&, const ChatRequest& req) -> std::string {
      if (n++ == 0) return "no label here";
      CHECK(req.messages.back().content == kReaskInstruction);
      return "I would categorize this sentence as: Contextual PVE";
    });
    AnnotationCache cache;
    Annotator ann(framework::default_framework(), client, quick_config(), cache);
    const auto a = ann.annotate("s", "text");
    CHECK(a.label == Label::c_pve);
    CHECK(a.prompt_hash ==
          framework::prompt_hash("mock-model", framework::assemble_prompt(framework::default_framework(), "text")));
  }

  TEST_CASE("transport failures back off exponentially") {
    int failures_left = 3;
    MockGlmClient client([&](const std::string&, const ChatRequest&) -> std::string {
      if (failures_left-- > 0) throw TransportError("boom");
      return "I would categorize this sentence as: No PVE";
    });
    AnnotationCache cache;
    auto cfg = quick_config();
    cfg.retry.base_backoff_s = 0.5;
    Annotator ann(framework::default_framework(), client, cfg, cache);
    std::vector<double> waits;
    ann.set_sleeper([&](std::chrono::duration<double> d) { waits.push_back(d.count()); });
    CHECK(ann.annotate("s", "t").label == Label::no_pve);
    CHECK(waits == std::vector<double>{1.0, 2.0, 4.0});
  }

  TEST_CASE("retries are bounded") {
    auto client = MockGlmClient::from_fixture(json{{"fail_ids", {"f"}}});
    AnnotationCache cache;
    auto cfg = quick_config();
    cfg.retry.max_attempts = 3;
    Annotator ann(framework::default_framework(), *client, cfg, cache);
    ann.set_sleeper([](auto) {});
    CHECK_THROWS_AS(ann.annotate("f", "t"), RetriesExhaustedError);
    CHECK(client->calls() == 3);
  }

  TEST_CASE("batch isolates failures") {
    auto items = numbered_items(100);
    json fx = rules_fixture();
    fx["fail_ids"] = {items[3].sent_id, items[50].sent_id};
    fx["garbage_ids"] = {items[7].sent_id};
    auto client = MockGlmClient::from_fixture(fx);
    AnnotationCache cache;
    Annotator ann(framework::default_framework(), *client, quick_config(), cache);
    ann.set_sleeper([](auto) {});
    const auto s = annotate_batch(items, ann);
    CHECK(s.done == 97);
    CHECK(s.annotations.size() == 97);
    REQUIRE(s.failed.size() == 3);
    CHECK(s.failed[0].sent_id == items[3].sent_id);
    CHECK(s.failed[1].sent_id == items[7].sent_id);
    CHECK(s.failed[1].reason == "unparseable");
    CHECK_FALSE(s.failed[1].raw.empty());
    CHECK(std::is_sorted(s.annotations.begin(), s.annotations.end(),
                         [](const auto& a, const auto& b) { return a.sent_id < b.sent_id; }));

    const auto again = annotate_batch(items, ann);
    CHECK(again.cached == 97);
    CHECK(again.done == 0);
  }

  TEST_CASE("concurrency never exceeds the configured limit") {
    auto client = MockGlmClient::from_fixture(rules_fixture());
    client->set_latency(std::chrono::milliseconds(5));
    AnnotationCache cache;
    Annotator ann(framework::default_framework(), *client, quick_config(3), cache);
    const auto s = annotate_batch(numbered_items(30), ann);
    CHECK(s.done == 30);
    CHECK(client->max_in_flight() <= 3);
    CHECK(client->max_in_flight() >= 2);
  }

  TEST_CASE("annotations round-trip and are written sorted") {
    TempDir dir;
    Annotation a{"b", Label::c_pve, "r", "m", 10, 5, "h1", "t"};
    Annotation b{"a", Label::d_pve, "r2", "m", 1, 2, "h2", "t"};
    CHECK(annotation_from_json(annotation_to_json(a)) == a);
    write_annotations_sorted(dir / "a.jsonl", {a, b});
    const auto back = read_annotations(dir / "a.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0] == b);
    CHECK(back[1] == a);
  }

  TEST_CASE("cost estimate") {
    const auto spec = framework::default_framework();
    const auto zero = estimate_cost(0, spec, Prices{}, "x");
    CHECK(zero.est_cost == 0.0);
    CHECK(zero.est_prompt_tokens == 0);

    // 100,000 calls x 400 completion tokens = 40M tokens at 0.03 per 1k.
    const auto big = estimate_cost(100000, spec, Prices{0.0, 0.03}, "x", 400);
    CHECK(big.est_completion_tokens == 40000000);
    CHECK(big.est_cost == doctest::Approx(1200.0));

    const auto per_call = token_estimate(framework::assemble_prompt(spec, "A short one."));
    const auto c = estimate_cost(10, spec, Prices{0.03, 0.06}, "A short one.", 300);
    CHECK(c.est_prompt_tokens == 10 * per_call);
    CHECK(c.est_cost == doctest::Approx(10 * per_call / 1000.0 * 0.03 + 3000 / 1000.0 * 0.06));
  }

  TEST_CASE("token estimate and median sentence") {
    CHECK(token_estimate("") == 0);
    CHECK(token_estimate("abcd") == 1);
    CHECK(token_estimate("abcde") == 2);
    CHECK(token_estimate("\xC3\xA9\xC3\xA9\xC3\xA9\xC3\xA9") == 1);
    CHECK(median_length_sentence({"aaaa", "a", "aaa", "aa"}) == "aa");
    CHECK(median_length_sentence({"aaa", "a", "aa"}) == "aa");
    CHECK(median_length_sentence({}).empty());
  }

  TEST_CASE("config validation") {
    GlmConfig cfg;
    cfg.max_concurrent = 0;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
    CHECK_THROWS_AS(HttpGlmClient(GlmConfig{}), ValidationError);
  }

  TEST_CASE("HTTP client speaks the chat-completions protocol") {
    httplib::Server server;
    std::string seen_auth;
    json seen_body;
    int requests = 0;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      seen_auth = req.get_header_value("Authorization");
      seen_body = json::parse(req.body);
      if (requests == 1) {
        res.status = 503;
        return;
      }
      res.set_content(json{{"choices", {{{"message", {{"content", "I would categorize this sentence as: Direct PVE"}}}}}},
                           {"usage", {{"prompt_tokens", 1234}, {"completion_tokens", 56}}}}
                          .dump(),
                      "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    GlmConfig cfg = quick_config();
    cfg.api_key = "sk-test";
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
    HttpGlmClient client(cfg);
    AnnotationCache cache;
    Annotator ann(framework::default_framework(), client, cfg, cache);
    ann.set_sleeper([](auto) {});
    const auto a = ann.annotate("s", "It improves safety.");
    server.stop();
    th.join();

    CHECK(requests == 2);
    CHECK(seen_auth == "Bearer sk-test");
    CHECK(seen_body["model"] == "mock-model");
    CHECK(seen_body["messages"].size() == 30);
    CHECK(a.label == Label::d_pve);
    CHECK(a.prompt_tokens == 1234);
    CHECK(a.completion_tokens == 56);
  }

  TEST_CASE("malformed completion body is a transport error") {
    CHECK_THROWS_AS(HttpGlmClient::parse_body("{}"), TransportError);
    CHECK_THROWS_AS(HttpGlmClient::parse_body("not json"), TransportError);
  }
}
