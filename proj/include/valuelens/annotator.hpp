#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "valuelens/common.hpp"
#include "valuelens/framework.hpp"
#include "valuelens/label.hpp"

namespace valuelens::annotator {

struct RetryPolicy {
  int max_attempts = 4;
  double base_backoff_s = 1.0;
};

struct GlmConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4";
  std::string api_key;
  int max_concurrent = 4;
  RetryPolicy retry;
  double temperature = 0.0;
  double timeout_s = 120.0;
  double requests_per_minute = 0.0;  // 0 disables rate limiting
};

// Throws ValidationError.
void validate(const GlmConfig& cfg);
// Overlays GLM_API_KEY, GLM_API_BASE and GLM_MODEL onto `base`.
GlmConfig config_from_env(GlmConfig base = {});

struct ChatRequest {
  std::string sent_id;
  std::string model;
  framework::PromptMessages messages;
  double temperature = 0.0;
};

struct ChatResponse {
  std::string content;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

// Transport or API failure; retried by the annotator.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GlmClient {
 public:
  virtual ~GlmClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// OpenAI-style POST {base_url}/chat/completions.
class HttpGlmClient : public GlmClient {
 public:
  explicit HttpGlmClient(GlmConfig cfg);
  ChatResponse complete(const ChatRequest& request) override;

  static json request_body(const ChatRequest& request);
  // Throws TransportError when the body lacks choices[0].message.content.
  static ChatResponse parse_body(const std::string& body);

 private:
  GlmConfig cfg_;
  std::string origin_;  // scheme://host[:port]
  std::string path_prefix_;
};

// Deterministic offline client. The responder receives the target sentence
// (the final user turn without its "Sentence: " prefix) and the request.
class MockGlmClient : public GlmClient {
 public:
  using Responder = std::function<std::string(const std::string& target, const ChatRequest&)>;

  explicit MockGlmClient(Responder responder);
  // Fixture JSON:
  //   {"rules": [{"contains": str, "label": str}], "default_label": str,
  //    "fixed_response": str?, "fail_ids": [str], "garbage_ids": [str]}
  // Rules are case-insensitive substring tests on the target sentence; the
  // first hit wins. Ids in fail_ids always raise TransportError; ids in
  // garbage_ids always answer with text lacking a label.
  static std::unique_ptr<MockGlmClient> from_fixture(const json& fixture);
  static std::unique_ptr<MockGlmClient> from_fixture_file(const fs::path& path);

  ChatResponse complete(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t max_in_flight() const { return max_in_flight_.load(); }
  // Sleep inside complete(), for concurrency tests.
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

 private:
  Responder responder_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
  std::chrono::milliseconds latency_{0};
};

std::string target_sentence(const framework::PromptMessages& messages);

struct ParsedResponse {
  Label label = Label::no_pve;
  std::string rationale;
};

class UnparseableError : public std::runtime_error {
 public:
  UnparseableError(std::string sent_id, std::string raw)
      : std::runtime_error("unparseable response for " + sent_id),
        sent_id_(std::move(sent_id)),
        raw_(std::move(raw)) {}
  const std::string& sent_id() const { return sent_id_; }
  const std::string& raw() const { return raw_; }

 private:
  std::string sent_id_;
  std::string raw_;
};

class RetriesExhaustedError : public std::runtime_error {
 public:
  RetriesExhaustedError(std::string sent_id, const std::string& last_error)
      : std::runtime_error("retries exhausted for " + sent_id + ": " + last_error),
        sent_id_(std::move(sent_id)) {}
  const std::string& sent_id() const { return sent_id_; }

 private:
  std::string sent_id_;
};

// Finds the last case-insensitive "categorize this sentence as:" and resolves
// the label that follows it through the alias table. The rationale is the
// whole response text.
std::optional<ParsedResponse> try_parse_response(std::string_view text);
// Throws UnparseableError (with an empty sent_id).
ParsedResponse parse_response(std::string_view text);

struct Annotation {
  std::string sent_id;
  Label label = Label::no_pve;
  std::string rationale;
  std::string model;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::string prompt_hash;
  std::string ts;

  bool operator==(const Annotation&) const = default;
};

json annotation_to_json(const Annotation& a);
Annotation annotation_from_json(const json& j);
std::vector<Annotation> read_annotations(const fs::path& path);
void write_annotations_sorted(const fs::path& path, std::vector<Annotation> annotations);

// Append-only JSONL keyed by prompt hash. Loading replays the file; the last
// record for a key wins. Appends are serialized; lookups take a shared lock.
class AnnotationCache {
 public:
  AnnotationCache() = default;
  explicit AnnotationCache(fs::path journal);

  std::optional<Annotation> get(const std::string& prompt_hash) const;
  void put(const Annotation& a);
  std::size_t size() const;

 private:
  fs::path journal_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, Annotation> entries_;
};

// Blocks callers so that no more than `per_minute` acquisitions happen per
// minute on average, with bursts up to `burst`.
class TokenBucket {
 public:
  TokenBucket(double per_minute, double burst);
  void acquire();

 private:
  double rate_per_s_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

inline constexpr std::string_view kReaskInstruction =
    "Your previous answer did not end with the required final line. Answer again and end "
    "with exactly: Based on these considerations, I would categorize this sentence as: "
    "<Direct PVE | Contextual PVE | No PVE>.";

class Annotator {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;
  using Clock = std::function<std::string()>;

  Annotator(framework::FrameworkSpec spec, GlmClient& client, GlmConfig cfg,
            AnnotationCache& cache);

  // Test hooks.
  void set_sleeper(Sleeper s) { sleep_ = std::move(s); }
  void set_clock(Clock c) { clock_ = std::move(c); }

  // Serves from the cache when the prompt hash is known. Otherwise calls the
  // client with retries, re-asks once on an unparseable answer, and stores
  // the result. `from_cache` (optional) reports which path was taken.
  Annotation annotate(const std::string& sent_id, std::string_view text,
                      bool* from_cache = nullptr);

  const GlmConfig& config() const { return cfg_; }
  const framework::FrameworkSpec& spec() const { return spec_; }

 private:
  ChatResponse call_with_retry(const ChatRequest& request);

  framework::FrameworkSpec spec_;
  GlmClient& client_;
  GlmConfig cfg_;
  AnnotationCache& cache_;
  Sleeper sleep_;
  Clock clock_;
  std::unique_ptr<TokenBucket> bucket_;
};

struct BatchItem {
  std::string sent_id;
  std::string text;
};

struct BatchFailure {
  std::string sent_id;
  std::string reason;
  std::string raw;  // unparseable response text, when available
};

struct BatchSummary {
  std::size_t done = 0;
  std::size_t cached = 0;
  std::vector<BatchFailure> failed;  // sorted by sent_id
  std::vector<Annotation> annotations;  // successes, sorted by sent_id
};

// Runs up to cfg.max_concurrent annotate() calls at a time. A failing item
// never aborts the batch.
BatchSummary annotate_batch(const std::vector<BatchItem>& items, Annotator& annotator);

void write_failures(const fs::path& path, const std::vector<BatchFailure>& failures);

struct Prices {
  double prompt_per_1k = 0.03;
  double completion_per_1k = 0.06;
};

struct CostEstimate {
  std::int64_t n_calls = 0;
  std::int64_t est_prompt_tokens = 0;
  std::int64_t est_completion_tokens = 0;
  double est_cost = 0.0;
};

inline constexpr std::int64_t kDefaultCompletionTokens = 300;

// ceil(code points / 4).
std::int64_t token_estimate(std::string_view text);
std::int64_t token_estimate(const framework::PromptMessages& messages);

// The sentence of median code-point length (lower median on even counts).
std::string median_length_sentence(const std::vector<std::string>& sentences);

CostEstimate estimate_cost(std::int64_t n_sentences, const framework::FrameworkSpec& spec,
                           const Prices& prices, std::string_view median_sentence,
                           std::int64_t completion_tokens_per_call = kDefaultCompletionTokens);

json cost_to_json(const CostEstimate& c);

}  // namespace valuelens::annotator
