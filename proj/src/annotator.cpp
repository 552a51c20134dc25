#include "valuelens/annotator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "valuelens/text.hpp"

namespace valuelens::annotator {

namespace fw = framework;

void validate(const GlmConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.max_concurrent < 1) problems.push_back("max_concurrent must be >= 1");
  if (cfg.retry.max_attempts < 1) problems.push_back("retry.max_attempts must be >= 1");
  if (cfg.retry.base_backoff_s < 0) problems.push_back("retry.base_backoff_s must be >= 0");
  if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0)) {
    problems.push_back("temperature must be in [0, 2]");
  }
  if (!(cfg.timeout_s > 0)) problems.push_back("timeout_s must be > 0");
  if (cfg.requests_per_minute < 0) problems.push_back("requests_per_minute must be >= 0");
  if (cfg.model.empty()) problems.push_back("model must be set");
  if (!problems.empty()) throw ValidationError("invalid GLM config", problems);
}

GlmConfig config_from_env(GlmConfig base) {
  if (const char* v = std::getenv("GLM_API_KEY")) base.api_key = v;
  if (const char* v = std::getenv("GLM_API_BASE")) base.base_url = v;
  if (const char* v = std::getenv("GLM_MODEL")) base.model = v;
  return base;
}

// ---------------------------------------------------------------------------
// HTTP client

HttpGlmClient::HttpGlmClient(GlmConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.api_key.empty()) throw ValidationError("GLM_API_KEY is not set");
  const auto scheme_end = cfg_.base_url.find("://");
  const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = cfg_.base_url.find('/', host_start);
  origin_ = cfg_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) path_prefix_ = cfg_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json HttpGlmClient::request_body(const ChatRequest& request) {
  return json{{"model", request.model},
              {"messages", fw::messages_to_json(request.messages)},
              {"temperature", request.temperature}};
}

ChatResponse HttpGlmClient::parse_body(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("invalid JSON from GLM endpoint: ") + e.what());
  }
  ChatResponse out;
  try {
    out.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw TransportError("GLM response lacks choices[0].message.content");
  }
  if (const auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
    out.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
    out.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
  }
  return out;
}

ChatResponse HttpGlmClient::complete(const ChatRequest& request) {
  httplib::Client cli(origin_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(cfg_.timeout_s));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  const httplib::Headers headers = {{"Authorization", "Bearer " + cfg_.api_key}};
  auto res = cli.Post(path_prefix_ + "/chat/completions", headers, request_body(request).dump(),
                      "application/json");
  if (!res) throw TransportError("HTTP error: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("GLM endpoint returned HTTP " + std::to_string(res->status) + ": " +
                         res->body.substr(0, 300));
  }
  return parse_body(res->body);
}

// ---------------------------------------------------------------------------
// Mock client

std::string target_sentence(const fw::PromptMessages& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role != fw::Role::user) continue;
    std::string_view content = it->content;
    constexpr std::string_view kPrefix = "Sentence: ";
    if (content.substr(0, kPrefix.size()) == kPrefix) content.remove_prefix(kPrefix.size());
    return std::string(content);
  }
  return {};
}

MockGlmClient::MockGlmClient(Responder responder) : responder_(std::move(responder)) {}

std::unique_ptr<MockGlmClient> MockGlmClient::from_fixture(const json& fixture) {
  struct Rule {
    std::string needle;
    Label label;
  };
  std::vector<Rule> rules;
  std::vector<std::string> problems;
  for (const auto& r : fixture.value("rules", json::array())) {
    const auto label_str = r.value("label", std::string{});
    const auto label = resolve_label(label_str);
    if (!label) {
      problems.push_back("mock rule has unknown label \"" + label_str + "\"");
      continue;
    }
    rules.push_back({text::to_lower_ascii(r.value("contains", std::string{})), *label});
  }
  const auto default_str = fixture.value("default_label", std::string("NO_PVE"));
  const auto default_label = resolve_label(default_str);
  if (!default_label) problems.push_back("unknown default_label \"" + default_str + "\"");
  if (!problems.empty()) throw ValidationError("invalid mock fixture", problems);

  const auto fail_ids = fixture.value("fail_ids", std::vector<std::string>{});
  const auto garbage_ids = fixture.value("garbage_ids", std::vector<std::string>{});
  const auto fixed = fixture.value("fixed_response", std::string{});

  auto responder = [=](const std::string& target, const ChatRequest& req) -> std::string {
    if (std::find(fail_ids.begin(), fail_ids.end(), req.sent_id) != fail_ids.end()) {
      throw TransportError("mock transport failure for " + req.sent_id);
    }
    if (std::find(garbage_ids.begin(), garbage_ids.end(), req.sent_id) != garbage_ids.end()) {
      return "The sentence is about sensors.";
    }
    if (!fixed.empty()) return fixed;
    const std::string lower = text::to_lower_ascii(target);
    Label label = *default_label;
    std::string reason = "none of the mock rules apply";
    for (const auto& rule : rules) {
      if (!rule.needle.empty() && lower.find(rule.needle) != std::string::npos) {
        label = rule.label;
        reason = "it mentions \"" + rule.needle + "\"";
        break;
      }
    }
    return std::string(fw::kDefaultCotTrigger) + " The sentence reads: " + target +
           " Under the offline rules, " + reason + ". " + canonical_suffix(label);
  };
  return std::make_unique<MockGlmClient>(std::move(responder));
}

std::unique_ptr<MockGlmClient> MockGlmClient::from_fixture_file(const fs::path& path) {
  try {
    return from_fixture(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

ChatResponse MockGlmClient::complete(const ChatRequest& request) {
  ++calls_;
  const std::size_t now = ++in_flight_;
  std::size_t prev = max_in_flight_.load();
  while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
  }
  struct Leave {
    std::atomic<std::size_t>& n;
    ~Leave() { --n; }
  } leave{in_flight_};
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  ChatResponse out;
  out.content = responder_(target_sentence(request.messages), request);
  out.prompt_tokens = token_estimate(request.messages);
  out.completion_tokens = token_estimate(out.content);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

std::optional<ParsedResponse> try_parse_response(std::string_view response) {
  static constexpr std::string_view kAnchor = "categorize this sentence as:";
  const std::string lower = text::to_lower_ascii(response);
  const auto pos = lower.rfind(kAnchor);
  if (pos == std::string::npos) return std::nullopt;

  std::string_view rest = std::string_view(lower).substr(pos + kAnchor.size());
  rest = rest.substr(0, rest.find('\n'));
  rest = text::trim(rest);
  while (!rest.empty() && (rest.front() == '*' || rest.front() == '"' || rest.front() == '\'' ||
                           rest.front() == '`' || text::is_space(rest.front()))) {
    rest.remove_prefix(1);
  }
  const std::string candidate = text::collapse_whitespace(rest);

  // Longest alias first so "no pve" is not read as a prefix of something else.
  std::vector<std::pair<std::string, Label>> aliases = label_aliases();
  std::stable_sort(aliases.begin(), aliases.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  for (const auto& [alias, label] : aliases) {
    if (candidate.compare(0, alias.size(), alias) != 0) continue;
    if (candidate.size() > alias.size()) {
      const char next = candidate[alias.size()];
      if (std::isalnum(static_cast<unsigned char>(next)) || next == '_' || next == '-') continue;
    }
    return ParsedResponse{label, std::string(response)};
  }
  return std::nullopt;
}

ParsedResponse parse_response(std::string_view text) {
  if (auto parsed = try_parse_response(text)) return std::move(*parsed);
  throw UnparseableError("", std::string(text));
}

// ---------------------------------------------------------------------------
// Annotation records and cache

json annotation_to_json(const Annotation& a) {
  return json{{"sent_id", a.sent_id},
              {"label", std::string(label_code(a.label))},
              {"rationale", a.rationale},
              {"model", a.model},
              {"prompt_tokens", a.prompt_tokens},
              {"completion_tokens", a.completion_tokens},
              {"prompt_hash", a.prompt_hash},
              {"ts", a.ts}};
}

Annotation annotation_from_json(const json& j) {
  Annotation a;
  a.sent_id = j.at("sent_id").get<std::string>();
  const auto label_str = j.at("label").get<std::string>();
  const auto label = resolve_label(label_str);
  if (!label) throw std::runtime_error("annotation " + a.sent_id + ": unknown label " + label_str);
  a.label = *label;
  a.rationale = j.at("rationale").get<std::string>();
  a.model = j.value("model", std::string{});
  a.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  a.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  a.prompt_hash = j.value("prompt_hash", std::string{});
  a.ts = j.value("ts", std::string{});
  return a;
}

std::vector<Annotation> read_annotations(const fs::path& path) {
  std::vector<Annotation> out;
  for_each_jsonl(path, [&](std::size_t, const json& j) { out.push_back(annotation_from_json(j)); });
  return out;
}

void write_annotations_sorted(const fs::path& path, std::vector<Annotation> annotations) {
  std::sort(annotations.begin(), annotations.end(),
            [](const Annotation& a, const Annotation& b) { return a.sent_id < b.sent_id; });
  std::string out;
  for (const auto& a : annotations) {
    out += annotation_to_json(a).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

AnnotationCache::AnnotationCache(fs::path journal) : journal_(std::move(journal)) {
  if (fs::exists(journal_)) {
    for_each_jsonl(journal_, [&](std::size_t, const json& j) {
      Annotation a = annotation_from_json(j);
      entries_[a.prompt_hash] = std::move(a);
    });
  } else if (journal_.has_parent_path()) {
    fs::create_directories(journal_.parent_path());
  }
}

std::optional<Annotation> AnnotationCache::get(const std::string& prompt_hash) const {
  std::shared_lock lock(mu_);
  const auto it = entries_.find(prompt_hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void AnnotationCache::put(const Annotation& a) {
  std::unique_lock lock(mu_);
  entries_[a.prompt_hash] = a;
  if (journal_.empty()) return;
  std::ofstream out(journal_, std::ios::app);
  out << annotation_to_json(a).dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot append to " + journal_.string());
}

std::size_t AnnotationCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Rate limiting

TokenBucket::TokenBucket(double per_minute, double burst)
    : rate_per_s_(per_minute / 60.0),
      burst_(std::max(1.0, burst)),
      tokens_(burst_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  if (rate_per_s_ <= 0) return;
  for (;;) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() *
                                               rate_per_s_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_per_s_);
    }
    std::this_thread::sleep_for(wait);
  }
}

// ---------------------------------------------------------------------------
// Annotator

Annotator::Annotator(fw::FrameworkSpec spec, GlmClient& client, GlmConfig cfg,
                     AnnotationCache& cache)
    : spec_(std::move(spec)),
      client_(client),
      cfg_(std::move(cfg)),
      cache_(cache),
      sleep_([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }),
      clock_([] { return utc_timestamp(); }) {
  validate(cfg_);
  fw::validate(spec_);
  if (cfg_.requests_per_minute > 0) {
    bucket_ = std::make_unique<TokenBucket>(cfg_.requests_per_minute, cfg_.max_concurrent);
  }
}

ChatResponse Annotator::call_with_retry(const ChatRequest& request) {
  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      // Attempt k waits base * 2^(k-1).
      sleep_(std::chrono::duration<double>(cfg_.retry.base_backoff_s *
                                           std::ldexp(1.0, attempt - 1)));
    }
    if (bucket_) bucket_->acquire();
    try {
      return client_.complete(request);
    } catch (const TransportError& e) {
      last_error = e.what();
      log_warn("GLM call for " + request.sent_id + " failed (attempt " + std::to_string(attempt) +
               "): " + last_error);
    }
  }
  throw RetriesExhaustedError(request.sent_id, last_error);
}

Annotation Annotator::annotate(const std::string& sent_id, std::string_view text,
                               bool* from_cache) {
  ChatRequest request;
  request.sent_id = sent_id;
  request.model = cfg_.model;
  request.temperature = cfg_.temperature;
  request.messages = fw::assemble_prompt(spec_, text);
  const std::string hash = fw::prompt_hash(cfg_.model, request.messages);

  // Identical sentences share a prompt and so a cache entry; the id is the caller's.
  if (auto hit = cache_.get(hash)) {
    if (from_cache != nullptr) *from_cache = true;
    hit->sent_id = sent_id;
    return *hit;
  }
  if (from_cache != nullptr) *from_cache = false;

  ChatResponse response = call_with_retry(request);
  std::int64_t prompt_tokens = response.prompt_tokens;
  std::int64_t completion_tokens = response.completion_tokens;
  auto parsed = try_parse_response(response.content);
  if (!parsed) {
    ChatRequest reask = request;
    reask.messages.push_back({fw::Role::assistant, response.content});
    reask.messages.push_back({fw::Role::user, std::string(kReaskInstruction)});
    ChatResponse second = call_with_retry(reask);
    prompt_tokens += second.prompt_tokens;
    completion_tokens += second.completion_tokens;
    parsed = try_parse_response(second.content);
    if (!parsed) {
      throw UnparseableError(sent_id, response.content + "\n---\n" + second.content);
    }
  }

  Annotation a;
  a.sent_id = sent_id;
  a.label = parsed->label;
  a.rationale = std::move(parsed->rationale);
  a.model = cfg_.model;
  a.prompt_tokens = prompt_tokens;
  a.completion_tokens = completion_tokens;
  a.prompt_hash = hash;
  a.ts = clock_();
  cache_.put(a);
  return a;
}

BatchSummary annotate_batch(const std::vector<BatchItem>& items, Annotator& annotator) {
  BatchSummary summary;
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= items.size()) return;
      const auto& item = items[i];
      try {
        bool cached = false;
        Annotation a = annotator.annotate(item.sent_id, item.text, &cached);
        std::lock_guard<std::mutex> lock(mu);
        (cached ? summary.cached : summary.done) += 1;
        summary.annotations.push_back(std::move(a));
      } catch (const UnparseableError& e) {
        std::lock_guard<std::mutex> lock(mu);
        summary.failed.push_back({item.sent_id, "unparseable", e.raw()});
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        summary.failed.push_back({item.sent_id, e.what(), {}});
      }
    }
  };

  const auto n_workers = std::min<std::size_t>(
      static_cast<std::size_t>(annotator.config().max_concurrent), items.size());
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::sort(summary.failed.begin(), summary.failed.end(),
            [](const BatchFailure& a, const BatchFailure& b) { return a.sent_id < b.sent_id; });
  std::sort(summary.annotations.begin(), summary.annotations.end(),
            [](const Annotation& a, const Annotation& b) { return a.sent_id < b.sent_id; });
  return summary;
}

void write_failures(const fs::path& path, const std::vector<BatchFailure>& failures) {
  std::string out;
  for (const auto& f : failures) {
    json j{{"sent_id", f.sent_id}, {"error", f.reason}};
    if (!f.raw.empty()) j["raw"] = f.raw;
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Cost

std::int64_t token_estimate(std::string_view s) {
  return static_cast<std::int64_t>((text::code_point_count(s) + 3) / 4);
}

std::int64_t token_estimate(const fw::PromptMessages& messages) {
  std::size_t chars = 0;
  for (const auto& m : messages) chars += text::code_point_count(m.content);
  return static_cast<std::int64_t>((chars + 3) / 4);
}

std::string median_length_sentence(const std::vector<std::string>& sentences) {
  if (sentences.empty()) return {};
  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return text::code_point_count(sentences[a]) < text::code_point_count(sentences[b]);
  });
  return sentences[order[(order.size() - 1) / 2]];
}

CostEstimate estimate_cost(std::int64_t n_sentences, const fw::FrameworkSpec& spec,
                           const Prices& prices, std::string_view median_sentence,
                           std::int64_t completion_tokens_per_call) {
  CostEstimate c;
  c.n_calls = n_sentences;
  if (n_sentences <= 0) return c;
  const auto per_call = token_estimate(fw::assemble_prompt(spec, median_sentence));
  c.est_prompt_tokens = n_sentences * per_call;
  c.est_completion_tokens = n_sentences * completion_tokens_per_call;
  c.est_cost = static_cast<double>(c.est_prompt_tokens) / 1000.0 * prices.prompt_per_1k +
               static_cast<double>(c.est_completion_tokens) / 1000.0 * prices.completion_per_1k;
  return c;
}

json cost_to_json(const CostEstimate& c) {
  return json{{"n_calls", c.n_calls},
              {"est_prompt_tokens", c.est_prompt_tokens},
              {"est_completion_tokens", c.est_completion_tokens},
              {"est_total_tokens", c.est_prompt_tokens + c.est_completion_tokens},
              {"est_cost", c.est_cost}};
}

}  // namespace valuelens::annotator
