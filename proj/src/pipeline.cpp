#include "valuelens/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "valuelens/corpus.hpp"
#include "valuelens/diversity.hpp"
#include "valuelens/metrics.hpp"
#include "valuelens/predict.hpp"

namespace valuelens::pipeline {

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"ingest", "filter",          "sample",
                                                 "annotate", "eval-rationales", "topics",
                                                 "train",  "eval",            "predict"};
  return names;
}

// ---------------------------------------------------------------------------
// Config

namespace {

class ConfigReader {
 public:
  ConfigReader(const json& root, fs::path base) : root_(root), base_(std::move(base)) {}

  std::vector<std::string> errors;

  const json* object(const json& parent, const std::string& key, const std::string& where,
                     bool required) {
    if (!parent.contains(key)) {
      if (required) errors.push_back(where + key + " is required");
      return nullptr;
    }
    if (!parent[key].is_object()) {
      errors.push_back(where + key + " must be an object");
      return nullptr;
    }
    return &parent[key];
  }

  template <typename T>
  std::optional<T> value(const json& parent, const std::string& key, const std::string& where,
                         bool required) {
    if (!parent.contains(key) || parent[key].is_null()) {
      if (required) errors.push_back(where + key + " is required");
      return std::nullopt;
    }
    try {
      return parent[key].get<T>();
    } catch (const json::exception&) {
      errors.push_back(where + key + " has the wrong type");
      return std::nullopt;
    }
  }

  std::optional<fs::path> existing_file(const json& parent, const std::string& key,
                                        const std::string& where, bool required) {
    const auto s = value<std::string>(parent, key, where, required);
    if (!s) return std::nullopt;
    fs::path p = resolve(*s);
    if (!fs::is_regular_file(p)) {
      errors.push_back(where + key + ": file not found: " + p.string());
      return std::nullopt;
    }
    return p;
  }

  fs::path resolve(const std::string& s) const {
    fs::path p(s);
    return p.is_absolute() ? p : base_ / p;
  }

  void absorb(const std::string& where, const ValidationError& e) {
    errors.push_back(where + e.what());
    for (const auto& p : e.problems()) errors.push_back(where + "  " + p);
  }

  const json& root() const { return root_; }

 private:
  const json& root_;
  fs::path base_;
};

RunConfig parse_impl(const json& j, const fs::path& base_dir, std::vector<std::string>& errors) {
  RunConfig cfg;
  if (!j.is_object()) {
    errors.push_back("config must be a JSON object");
    return cfg;
  }
  ConfigReader r(j, base_dir);

  if (const json* paths = r.object(j, "paths", "", true)) {
    if (auto p = r.existing_file(*paths, "corpus", "paths.", true)) cfg.corpus = *p;
    if (auto p = r.existing_file(*paths, "keywords", "paths.", true)) {
      cfg.keywords = *p;
      try {
        keywords::load_keywords(*p);
      } catch (const ValidationError& e) {
        r.absorb("paths.keywords: ", e);
      }
    }
    if (auto p = r.existing_file(*paths, "framework", "paths.", false)) {
      cfg.framework = *p;
      try {
        framework::load_framework(*p);
      } catch (const ValidationError& e) {
        r.absorb("paths.framework: ", e);
      }
    }
    if (auto w = r.value<std::string>(*paths, "workdir", "paths.", true)) cfg.workdir = r.resolve(*w);
  }

  if (const json* sample = r.object(j, "sample", "", true)) {
    if (const json* rates = r.object(*sample, "rates", "sample.", true)) {
      for (int tier = keywords::kMinTier; tier <= keywords::kMaxTier; ++tier) {
        const std::string key = std::to_string(tier);
        if (!rates->contains(key)) {
          r.errors.push_back("sample.rates: missing tier " + key);
          continue;
        }
        if (auto v = r.value<double>(*rates, key, "sample.rates.", true)) {
          if (!(*v >= 0.0 && *v <= 1.0)) {
            r.errors.push_back("sample.rates." + key + " must be in [0, 1]");
          }
          cfg.sample.rates[static_cast<std::size_t>(tier - 1)] = *v;
        }
      }
      for (const auto& [key, v] : rates->items()) {
        if (key != "1" && key != "2" && key != "3" && key != "4") {
          r.errors.push_back("sample.rates: unknown tier '" + key + "'");
        }
      }
    }
    if (auto mode = r.value<std::string>(*sample, "mode", "sample.", false)) {
      if (*mode == "bernoulli") {
        cfg.sample.mode = keywords::SampleMode::bernoulli;
      } else if (*mode == "exact_count") {
        cfg.sample.mode = keywords::SampleMode::exact_count;
      } else {
        r.errors.push_back("sample.mode must be bernoulli or exact_count");
      }
    }
  }

  if (const json* glm = r.object(j, "glm", "", true)) {
    if (glm->contains("mock")) {
      if (auto p = r.existing_file(*glm, "mock", "glm.", true)) {
        cfg.mock_fixture = *p;
        try {
          annotator::MockGlmClient::from_fixture_file(*p);
        } catch (const ValidationError& e) {
          r.absorb("glm.mock: ", e);
        } catch (const std::exception& e) {
          r.errors.push_back(std::string("glm.mock: ") + e.what());
        }
      }
    }
    auto& g = cfg.glm;
    if (auto v = r.value<std::string>(*glm, "base_url", "glm.", false)) g.base_url = *v;
    if (auto v = r.value<std::string>(*glm, "model", "glm.", false)) g.model = *v;
    if (auto v = r.value<int>(*glm, "max_concurrent", "glm.", false)) g.max_concurrent = *v;
    if (auto v = r.value<int>(*glm, "max_attempts", "glm.", false)) g.retry.max_attempts = *v;
    if (auto v = r.value<double>(*glm, "base_backoff_s", "glm.", false)) g.retry.base_backoff_s = *v;
    if (auto v = r.value<double>(*glm, "temperature", "glm.", false)) g.temperature = *v;
    if (auto v = r.value<double>(*glm, "timeout_s", "glm.", false)) g.timeout_s = *v;
    if (auto v = r.value<double>(*glm, "requests_per_minute", "glm.", false)) {
      g.requests_per_minute = *v;
    }
    try {
      annotator::validate(g);
    } catch (const ValidationError& e) {
      r.absorb("glm: ", e);
    }
  }

  if (auto task = r.value<std::string>(j, "task", "", true)) {
    try {
      cfg.task = distill::parse_task(*task);
    } catch (const ValidationError& e) {
      r.absorb("task: ", e);
    }
  }
  if (auto v = r.value<double>(j, "split_ratio", "", false)) {
    cfg.split_ratio = *v;
    if (!(*v > 0.0 && *v < 1.0)) r.errors.push_back("split_ratio must be in (0, 1)");
  }

  if (const json* seeds = r.object(j, "seeds", "", true)) {
    auto seed = [&](const char* key, std::uint64_t& out) {
      if (auto v = r.value<std::uint64_t>(*seeds, key, "seeds.", true)) out = *v;
    };
    seed("sample", cfg.seeds.sample);
    seed("split", cfg.seeds.split);
    seed("train", cfg.seeds.train);
    seed("topics", cfg.seeds.topics);
    seed("baseline", cfg.seeds.baseline);
  }
  cfg.sample.seed = cfg.seeds.sample;

  if (const json* prices = r.object(j, "prices", "", false)) {
    if (auto v = r.value<double>(*prices, "prompt_per_1k", "prices.", false)) {
      cfg.prices.prompt_per_1k = *v;
    }
    if (auto v = r.value<double>(*prices, "completion_per_1k", "prices.", false)) {
      cfg.prices.completion_per_1k = *v;
    }
    if (cfg.prices.prompt_per_1k < 0 || cfg.prices.completion_per_1k < 0) {
      r.errors.push_back("prices must be non-negative");
    }
  }

  if (const json* train = r.object(j, "train", "", false)) {
    try {
      cfg.train = distill::train_config_from_json(*train);
      distill::validate(cfg.train);
    } catch (const ValidationError& e) {
      r.absorb("train: ", e);
    } catch (const json::exception& e) {
      r.errors.push_back(std::string("train: ") + e.what());
    }
  }
  cfg.train.seed = cfg.seeds.train;

  if (const json* topics = r.object(j, "topics", "", false)) {
    if (auto v = r.value<std::string>(*topics, "label", "topics.", false)) {
      if (auto l = resolve_label(*v)) {
        cfg.topics.label = *l;
      } else {
        r.errors.push_back("topics.label: unknown label '" + *v + "'");
      }
    }
    if (auto v = r.value<int>(*topics, "k", "topics.", false)) cfg.topics.k = *v;
    if (auto v = r.value<int>(*topics, "iterations", "topics.", false)) cfg.topics.iterations = *v;
    if (auto v = r.value<std::size_t>(*topics, "top_words", "topics.", false)) {
      cfg.topics.top_words = *v;
    }
    if (cfg.topics.k < 2) r.errors.push_back("topics.k must be >= 2");
    if (cfg.topics.iterations < 1) r.errors.push_back("topics.iterations must be >= 1");
    if (cfg.topics.top_words < 1) r.errors.push_back("topics.top_words must be >= 1");
  }

  if (auto v = r.value<int>(j, "baseline_trials", "", false)) {
    cfg.baseline_trials = *v;
    if (*v < 1) r.errors.push_back("baseline_trials must be >= 1");
  }

  static const std::set<std::string> known = {"paths", "sample", "glm",    "task",
                                              "split_ratio", "seeds", "prices", "train",
                                              "topics", "baseline_trials"};
  for (const auto& [key, v] : j.items()) {
    if (!known.count(key)) r.errors.push_back("unknown key '" + key + "'");
  }
  errors = std::move(r.errors);
  return cfg;
}

}  // namespace

std::vector<std::string> config_errors(const json& j, const fs::path& base_dir) {
  std::vector<std::string> errors;
  parse_impl(j, base_dir, errors);
  return errors;
}

RunConfig parse_config(const json& j, const fs::path& base_dir) {
  std::vector<std::string> errors;
  RunConfig cfg = parse_impl(j, base_dir, errors);
  if (!errors.empty()) throw ValidationError("invalid run config", errors);
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ValidationError("config not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

framework::FrameworkSpec load_framework_or_default(const std::optional<fs::path>& path) {
  return path ? framework::load_framework(*path) : framework::default_framework();
}

// ---------------------------------------------------------------------------
// Stages

namespace {

class Runner {
 public:
  Runner(const RunConfig& cfg, const RunOptions& options) : cfg_(cfg), options_(options) {}

  StageSummary run(const std::string& stage) {
    if (stage == "ingest") return ingest();
    if (stage == "filter") return filter();
    if (stage == "sample") return sample();
    if (stage == "annotate") return annotate();
    if (stage == "eval-rationales") return eval_rationales();
    if (stage == "topics") return topics();
    if (stage == "train") return train();
    if (stage == "eval") return eval();
    return predict();
  }

 private:
  fs::path dir(const std::string& stage) const { return cfg_.workdir / stage; }
  fs::path sentences() const { return dir("ingest") / "sentences.jsonl"; }
  fs::path matches() const { return dir("filter") / "matches.jsonl"; }
  fs::path sample_ids() const { return dir("sample") / "sample_ids.txt"; }
  fs::path annotations() const { return dir("annotate") / "annotations.jsonl"; }
  fs::path model() const { return dir("train") / "model.json"; }

  std::string rel(const fs::path& p) const {
    return fs::relative(p, cfg_.workdir).generic_string();
  }

  // Paths under the workdir are stored relative to it, so a moved workdir stays current.
  json file_entry(const fs::path& p) const {
    const std::string r = rel(p);
    const bool inside = !r.empty() && r.rfind("..", 0) != 0;
    return json{{"path", inside ? r : p.generic_string()}, {"sha256", sha256_file(p)}};
  }

  void require(const fs::path& p, const std::string& upstream) const {
    if (!fs::is_regular_file(p)) {
      throw ValidationError("missing " + p.string() + "; run stage '" + upstream + "' first");
    }
  }

  json framework_entry() const {
    if (cfg_.framework) return file_entry(*cfg_.framework);
    return json{{"path", "<default>"},
                {"sha256", sha256_hex(framework::default_framework_json())}};
  }

  bool up_to_date(const std::string& stage, const json& inputs, const json& params) const {
    if (options_.force) return false;
    const fs::path path = dir(stage) / "manifest.json";
    if (!fs::is_regular_file(path)) return false;
    json m;
    try {
      m = json::parse(read_file(path));
    } catch (const json::exception&) {
      return false;
    }
    if (m.value("version", "") != kVersion || m.value("inputs", json()) != inputs ||
        m.value("params", json()) != params) {
      return false;
    }
    const json outputs = m.value("outputs", json::object());
    for (const auto& [name, entry] : outputs.items()) {
      const fs::path p = cfg_.workdir / entry.at("path").get<std::string>();
      if (!fs::is_regular_file(p) || sha256_file(p) != entry.at("sha256")) return false;
    }
    return true;
  }

  void write_manifest(const std::string& stage, const json& inputs, const json& params,
                      const std::map<std::string, fs::path>& outputs, const std::string& started) {
    json outs = json::object();
    for (const auto& [name, p] : outputs) {
      outs[name] = json{{"path", rel(p)}, {"sha256", sha256_file(p)}};
    }
    const json m{{"stage", stage},    {"version", kVersion},   {"inputs", inputs},
                 {"params", params},  {"outputs", outs},       {"started_at", started},
                 {"finished_at", utc_timestamp()}};
    write_file_atomic(dir(stage) / "manifest.json", m.dump(2) + "\n");
  }

  static StageSummary skipped(const std::string& stage) {
    log_info("stage " + stage + ": up to date, skipped");
    return StageSummary{stage, true, json::object()};
  }

  static void write_json(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(2) + "\n"); }

  StageSummary ingest() {
    if (!fs::is_regular_file(cfg_.corpus)) {
      throw ValidationError("corpus not found: " + cfg_.corpus.string());
    }
    const json inputs{{"corpus", file_entry(cfg_.corpus)}};
    const json params = json::object();
    if (up_to_date("ingest", inputs, params)) return skipped("ingest");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("ingest"));
    const corpus::IngestResult r = corpus::ingest_documents(cfg_.corpus, sentences());
    json per_section = json::object();
    for (const auto& [s, n] : r.stats.per_section) per_section[std::string(corpus::section_name(s))] = n;
    json errors = json::array();
    for (const auto& e : r.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    const json report{{"n_documents", r.stats.n_documents},
                      {"n_sentences", r.stats.n_sentences},
                      {"per_section", per_section},
                      {"errors", errors}};
    const fs::path report_path = dir("ingest") / "ingest_report.json";
    write_json(report_path, report);
    write_manifest("ingest", inputs, params,
                   {{"sentences", sentences()}, {"report", report_path}}, started);
    return {"ingest", false, report};
  }

  StageSummary filter() {
    require(sentences(), "ingest");
    const json inputs{{"sentences", file_entry(sentences())}, {"keywords", file_entry(cfg_.keywords)}};
    const json params = json::object();
    if (up_to_date("filter", inputs, params)) return skipped("filter");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("filter"));
    const keywords::KeywordSet ks = keywords::load_keywords(cfg_.keywords);
    const auto records = keywords::filter_corpus(sentences(), ks);
    keywords::write_matches(matches(), records);
    std::map<std::string, std::size_t> per_tier;
    for (const auto& m : records) ++per_tier[std::to_string(m.tier)];
    write_manifest("filter", inputs, params, {{"matches", matches()}}, started);
    return {"filter", false, json{{"n_matches", records.size()}, {"per_tier", per_tier}}};
  }

  StageSummary sample() {
    require(matches(), "filter");
    const json inputs{{"matches", file_entry(matches())}};
    const json params{{"rates", cfg_.sample.rates},
                      {"seed", cfg_.sample.seed},
                      {"mode", cfg_.sample.mode == keywords::SampleMode::bernoulli ? "bernoulli"
                                                                                  : "exact_count"}};
    if (up_to_date("sample", inputs, params)) return skipped("sample");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("sample"));
    const auto ids = keywords::sample_by_tier(keywords::read_matches(matches()), cfg_.sample);
    keywords::write_ids(sample_ids(), ids);
    write_manifest("sample", inputs, params, {{"sample_ids", sample_ids()}}, started);
    return {"sample", false, json{{"n_selected", ids.size()}}};
  }

  StageSummary annotate() {
    require(sample_ids(), "sample");
    require(sentences(), "ingest");
    json inputs{{"sample_ids", file_entry(sample_ids())},
                {"sentences", file_entry(sentences())},
                {"framework", framework_entry()}};
    if (cfg_.mock_fixture) inputs["mock"] = file_entry(*cfg_.mock_fixture);
    const json params{{"model", cfg_.glm.model},
                      {"temperature", cfg_.glm.temperature},
                      {"client", cfg_.mock_fixture ? "mock" : "http"}};
    if (up_to_date("annotate", inputs, params)) return skipped("annotate");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("annotate"));

    const framework::FrameworkSpec spec = load_framework_or_default(cfg_.framework);
    const auto ids = keywords::read_ids(sample_ids());
    const std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<annotator::BatchItem> items;
    std::vector<std::string> texts;
    corpus::for_each_sentence(sentences(), [&](const corpus::Sentence& s) {
      if (wanted.count(s.sent_id)) {
        items.push_back({s.sent_id, s.text});
        texts.push_back(s.text);
      }
    });
    if (items.size() != wanted.size()) {
      throw ValidationError("sample lists sentences absent from the store; rerun stage 'sample'");
    }

    std::unique_ptr<annotator::GlmClient> owned;
    annotator::GlmClient* client = options_.client;
    annotator::GlmConfig glm = cfg_.glm;
    if (!client) {
      if (cfg_.mock_fixture) {
        owned = annotator::MockGlmClient::from_fixture_file(*cfg_.mock_fixture);
      } else {
        glm = annotator::config_from_env(glm);
        if (glm.api_key.empty()) throw ValidationError("GLM_API_KEY is not set");
        owned = std::make_unique<annotator::HttpGlmClient>(glm);
      }
      client = owned.get();
    }
    annotator::AnnotationCache cache(dir("annotate") / "journal.jsonl");
    annotator::Annotator ann(spec, *client, glm, cache);
    if (options_.clock) ann.set_clock(options_.clock);
    const annotator::BatchSummary summary = annotator::annotate_batch(items, ann);
    annotator::write_annotations_sorted(annotations(), summary.annotations);
    const fs::path failures = dir("annotate") / "failures.jsonl";
    annotator::write_failures(failures, summary.failed);
    const annotator::CostEstimate cost = annotator::estimate_cost(
        static_cast<std::int64_t>(items.size()), spec, cfg_.prices,
        annotator::median_length_sentence(texts));
    const fs::path cost_path = dir("annotate") / "cost_estimate.json";
    write_json(cost_path, annotator::cost_to_json(cost));

    const json details{{"done", summary.done},
                       {"cached", summary.cached},
                       {"failed", summary.failed.size()}};
    if (summary.failed.empty()) {
      write_manifest("annotate", inputs, params,
                     {{"annotations", annotations()},
                      {"failures", failures},
                      {"cost_estimate", cost_path},
                      {"journal", dir("annotate") / "journal.jsonl"}},
                     started);
    } else {
      // no manifest, so the next run retries the failures (successes are cached)
      log_warn(std::to_string(summary.failed.size()) + " annotation(s) failed; see " +
               failures.string());
    }
    return {"annotate", false, details};
  }

  StageSummary eval_rationales() {
    require(annotations(), "annotate");
    const json inputs{{"annotations", file_entry(annotations())}, {"framework", framework_entry()}};
    const json params = json::object();
    if (up_to_date("eval-rationales", inputs, params)) return skipped("eval-rationales");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("eval-rationales"));
    const auto report = rationale_eval::diversity_report(
        annotator::read_annotations(annotations()), load_framework_or_default(cfg_.framework));
    const json j = rationale_eval::report_to_json(report);
    const fs::path out = dir("eval-rationales") / "diversity.json";
    write_json(out, j);
    write_manifest("eval-rationales", inputs, params, {{"diversity", out}}, started);
    return {"eval-rationales", false, j};
  }

  StageSummary topics() {
    require(annotations(), "annotate");
    const json inputs{{"annotations", file_entry(annotations())}, {"framework", framework_entry()}};
    const json params{{"label", std::string(label_code(cfg_.topics.label))},
                      {"k", cfg_.topics.k},
                      {"iterations", cfg_.topics.iterations},
                      {"top_words", cfg_.topics.top_words},
                      {"seed", cfg_.seeds.topics}};
    if (up_to_date("topics", inputs, params)) return skipped("topics");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("topics"));
    const framework::FrameworkSpec spec = load_framework_or_default(cfg_.framework);
    std::vector<text::TokenSeq> docs;
    for (const auto& a : annotator::read_annotations(annotations())) {
      if (a.label == cfg_.topics.label) {
        docs.push_back(text::tokenize(rationale_eval::rationale_body(a.rationale, spec.cot_trigger)));
      }
    }
    if (docs.empty()) {
      throw ValidationError("no annotations labeled " + std::string(label_code(cfg_.topics.label)) +
                            " to model topics on");
    }
    rationale_eval::LdaConfig lda;
    lda.k = cfg_.topics.k;
    lda.iterations = cfg_.topics.iterations;
    lda.seed = cfg_.seeds.topics;
    const auto model = rationale_eval::lda_fit(docs, lda);
    json report = rationale_eval::topic_report(model, cfg_.topics.top_words);
    report["label"] = std::string(label_code(cfg_.topics.label));
    const fs::path out = dir("topics") / "topics.json";
    write_json(out, report);
    write_manifest("topics", inputs, params, {{"topics", out}}, started);
    return {"topics", false, json{{"documents", docs.size()}, {"k", lda.k}}};
  }

  distill::LabeledDataset dataset() const {
    return distill::build_dataset(annotator::read_annotations(annotations()),
                                  corpus::read_sentence_texts(sentences()), cfg_.task,
                                  cfg_.split_ratio, cfg_.seeds.split);
  }

  json split_params() const {
    return json{{"task", std::string(distill::task_name(cfg_.task))},
                {"split_ratio", cfg_.split_ratio},
                {"split_seed", cfg_.seeds.split}};
  }

  StageSummary train() {
    require(annotations(), "annotate");
    require(sentences(), "ingest");
    const json inputs{{"annotations", file_entry(annotations())}, {"sentences", file_entry(sentences())}};
    json params = split_params();
    params["train"] = distill::train_config_to_json(cfg_.train);
    if (up_to_date("train", inputs, params)) return skipped("train");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("train"));

    const distill::LabeledDataset ds = dataset();
    std::vector<distill::Example> examples;
    for (const auto& item : ds.subset(distill::Split::train)) {
      examples.push_back({distill::featurize(item.text, cfg_.train.hash_bits), item.label});
    }
    distill::TrainResult result = distill::train_linear(examples, ds.classes, cfg_.train);
    result.model.provenance = split_params();
    result.model.provenance["annotations_sha256"] = sha256_file(annotations());
    distill::save_model(model(), result.model);

    std::size_t correct = 0;
    for (const auto& ex : examples) correct += result.model.predict(ex.x) == ex.y ? 1 : 0;
    const json report{{"n_train", examples.size()},
                      {"n_eval", ds.items.size() - examples.size()},
                      {"epoch_objective", result.epoch_objective},
                      {"train_accuracy", static_cast<double>(correct) /
                                             static_cast<double>(examples.size())}};
    const fs::path split_path = dir("train") / "split.json";
    const fs::path report_path = dir("train") / "train_report.json";
    write_json(split_path, distill::split_to_json(ds));
    write_json(report_path, report);
    write_manifest("train", inputs, params,
                   {{"model", model()}, {"split", split_path}, {"report", report_path}}, started);
    return {"train", false, report};
  }

  StageSummary eval() {
    require(model(), "train");
    require(annotations(), "annotate");
    require(sentences(), "ingest");
    const json inputs{{"model", file_entry(model())},
                      {"annotations", file_entry(annotations())},
                      {"sentences", file_entry(sentences())}};
    json params = split_params();
    params["baseline_trials"] = cfg_.baseline_trials;
    params["baseline_seed"] = cfg_.seeds.baseline;
    if (up_to_date("eval", inputs, params)) return skipped("eval");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("eval"));

    const distill::LinearModel m = distill::load_model(model());
    const distill::LabeledDataset ds = dataset();
    std::vector<int> truth;
    for (const auto& item : ds.subset(distill::Split::eval)) truth.push_back(item.label);
    const json report{
        {"model", distill::report_to_json(distill::evaluate_model(m, ds))},
        {"random_uniform",
         distill::report_to_json(distill::random_baseline(
             truth, ds.classes, distill::BaselineMode::uniform, cfg_.seeds.baseline,
             cfg_.baseline_trials))},
        {"random_biased",
         distill::report_to_json(distill::random_baseline(
             truth, ds.classes, distill::BaselineMode::biased, cfg_.seeds.baseline,
             cfg_.baseline_trials))},
        {"baseline_trials", cfg_.baseline_trials}};
    const fs::path out = dir("eval") / "eval_report.json";
    write_json(out, report);
    write_manifest("eval", inputs, params, {{"report", out}}, started);
    return {"eval", false,
            json{{"macro_f1", report["model"]["macro"]["f1"]},
                 {"accuracy", report["model"]["accuracy"]}}};
  }

  StageSummary predict() {
    require(model(), "train");
    require(sentences(), "ingest");
    const json inputs{{"model", file_entry(model())}, {"sentences", file_entry(sentences())}};
    const json params = json::object();
    if (up_to_date("predict", inputs, params)) return skipped("predict");
    const std::string started = utc_timestamp();
    fs::create_directories(dir("predict"));
    const fs::path out = dir("predict") / "predictions.jsonl";
    const std::size_t n = distill::predict_batch(distill::load_model(model()), sentences(), out);
    write_manifest("predict", inputs, params, {{"predictions", out}}, started);
    return {"predict", false, json{{"n_records", n}}};
  }

  const RunConfig& cfg_;
  const RunOptions& options_;
};

}  // namespace

std::vector<StageSummary> run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages,
                                       const RunOptions& options) {
  const auto& names = stage_names();
  std::set<std::string> requested;
  for (const auto& s : stages) {
    if (std::find(names.begin(), names.end(), s) == names.end()) {
      throw ValidationError("unknown stage '" + s + "'");
    }
    requested.insert(s);
  }
  fs::create_directories(cfg.workdir);
  Runner runner(cfg, options);
  std::vector<StageSummary> out;
  for (const auto& name : names) {
    if (!requested.count(name)) continue;
    log_info("stage " + name);
    out.push_back(runner.run(name));
  }
  return out;
}

json summary_to_json(const std::vector<StageSummary>& summaries) {
  json out = json::array();
  for (const auto& s : summaries) {
    out.push_back({{"stage", s.stage}, {"status", s.skipped ? "skipped" : "ran"}, {"details", s.details}});
  }
  return out;
}

}  // namespace valuelens::pipeline
