#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "valuelens/annotator.hpp"
#include "valuelens/corpus.hpp"
#include "valuelens/diversity.hpp"
#include "valuelens/keywords.hpp"
#include "valuelens/lda.hpp"
#include "valuelens/pipeline.hpp"
#include "valuelens/predict.hpp"
#include "valuelens/review_server.hpp"

namespace vl = valuelens;
namespace fs = std::filesystem;
using vl::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

void write_or_print(const std::string& out, const json& j) {
  if (out.empty()) {
    print(j);
  } else {
    vl::write_file_atomic(out, j.dump(2) + "\n");
  }
}

std::unordered_map<std::string, std::string> texts_for(const std::string& store) {
  return vl::corpus::read_sentence_texts(store);
}

// Split parameters come from the model when given, else from the flags.
struct SplitArgs {
  std::string model;
  std::string task = "3class";
  double ratio = 0.9;
  std::uint64_t seed = 0;
};

void add_split_flags(CLI::App* cmd, SplitArgs& s) {
  cmd->add_option("--task", s.task, "3class or 2class")->check(CLI::IsMember({"3class", "2class"}));
  cmd->add_option("--split-ratio", s.ratio, "train share");
  cmd->add_option("--split-seed", s.seed, "split seed");
}

vl::distill::LabeledDataset dataset_from(const SplitArgs& s, const std::string& annotations,
                                         const std::string& corpus) {
  std::string task = s.task;
  double ratio = s.ratio;
  std::uint64_t seed = s.seed;
  if (!s.model.empty()) {
    const auto m = vl::distill::load_model(s.model);
    task = m.provenance.value("task", task);
    ratio = m.provenance.value("split_ratio", ratio);
    seed = m.provenance.value("split_seed", seed);
  }
  return vl::distill::build_dataset(vl::annotator::read_annotations(annotations), texts_for(corpus),
                                    vl::distill::parse_task(task), ratio, seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"valuelens: discover public value expressions in sentence corpora"};
  app.require_subcommand(1);
  std::string config_path;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--config", config_path, "run configuration JSON");
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  // ingest
  std::string ingest_in, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "segment documents into a sentence store");
  ingest->add_option("--input", ingest_in, "documents JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "sentence store JSONL")->required();

  // filter
  std::string filter_kw, filter_corpus, filter_out;
  auto* filter = app.add_subcommand("filter", "match the keyword lexicon against a sentence store");
  filter->add_option("--keywords", filter_kw, "lexicon CSV")->required()->check(CLI::ExistingFile);
  filter->add_option("--corpus", filter_corpus, "sentence store")->required()->check(CLI::ExistingFile);
  filter->add_option("--out", filter_out, "match JSONL")->required();

  // sample
  std::string sample_matches, sample_rates = "0.045,0.14,0.65,1.0", sample_out, sample_mode = "bernoulli";
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "tier-weighted random sample of matches");
  sample->add_option("--matches", sample_matches, "match JSONL")->required()->check(CLI::ExistingFile);
  sample->add_option("--rates", sample_rates, "per-tier rates, tiers 1..4");
  sample->add_option("--seed", sample_seed, "sampling seed")->required();
  sample->add_option("--mode", sample_mode, "bernoulli or exact_count")
      ->check(CLI::IsMember({"bernoulli", "exact_count"}));
  sample->add_option("--out", sample_out, "id list (one per line)")->required();

  // annotate
  std::string ann_framework, ann_sample, ann_corpus, ann_out, ann_mock, ann_cache, ann_failures;
  bool ann_dry = false;
  vl::annotator::Prices prices;
  std::int64_t completion_tokens = vl::annotator::kDefaultCompletionTokens;
  int ann_concurrency = 0;
  auto* annotate = app.add_subcommand("annotate", "label sampled sentences with the GLM");
  annotate->add_option("--framework", ann_framework, "framework JSON (default: built-in)")
      ->check(CLI::ExistingFile);
  annotate->add_option("--sample", ann_sample, "id list")->required()->check(CLI::ExistingFile);
  annotate->add_option("--corpus", ann_corpus, "sentence store")->required()->check(CLI::ExistingFile);
  annotate->add_option("--out", ann_out, "annotation JSONL (sorted)");
  annotate->add_option("--mock", ann_mock, "mock GLM fixture")->check(CLI::ExistingFile);
  annotate->add_option("--cache", ann_cache, "append-only cache journal (default: <out>.journal)");
  annotate->add_option("--failures", ann_failures, "failure JSONL (default: <out>.failures)");
  annotate->add_option("--max-concurrent", ann_concurrency, "in-flight request limit");
  annotate->add_flag("--dry-run-cost", ann_dry, "print the cost estimate and exit");
  annotate->add_option("--prompt-price", prices.prompt_per_1k, "per 1K prompt tokens");
  annotate->add_option("--completion-price", prices.completion_per_1k, "per 1K completion tokens");

  // cost-estimate
  std::string cost_framework, cost_sample, cost_corpus;
  std::int64_t cost_n = -1;
  auto* cost = app.add_subcommand("cost-estimate", "estimate GLM tokens and cost");
  cost->add_option("--framework", cost_framework, "framework JSON")->check(CLI::ExistingFile);
  cost->add_option("--sample", cost_sample, "id list")->check(CLI::ExistingFile);
  cost->add_option("--corpus", cost_corpus, "sentence store")->check(CLI::ExistingFile);
  cost->add_option("--n", cost_n, "number of sentences (overrides the sample size)");
  cost->add_option("--prompt-price", prices.prompt_per_1k, "per 1K prompt tokens");
  cost->add_option("--completion-price", prices.completion_per_1k, "per 1K completion tokens");
  cost->add_option("--completion-tokens", completion_tokens, "expected tokens per response");

  // prompt
  std::string prompt_framework, prompt_sentence;
  auto* prompt = app.add_subcommand("prompt", "print the assembled messages for one sentence");
  prompt->add_option("--framework", prompt_framework, "framework JSON")->check(CLI::ExistingFile);
  prompt->add_option("--sentence", prompt_sentence, "target sentence")->required();

  // eval-rationales
  std::string er_ann, er_framework, er_out;
  auto* eval_rat = app.add_subcommand("eval-rationales", "BLEU diversity and faithfulness report");
  eval_rat->add_option("--annotations", er_ann, "annotation JSONL")->required()->check(CLI::ExistingFile);
  eval_rat->add_option("--framework", er_framework, "framework JSON")->check(CLI::ExistingFile);
  eval_rat->add_option("--out", er_out, "report JSON (default: stdout)");

  // topics
  std::string tp_ann, tp_label = "D_PVE", tp_out, tp_framework;
  vl::rationale_eval::LdaConfig tp_cfg;
  std::size_t tp_top = 10;
  auto* topics = app.add_subcommand("topics", "LDA topics over rationales of one label");
  topics->add_option("--annotations", tp_ann, "annotation JSONL")->required()->check(CLI::ExistingFile);
  topics->add_option("--label", tp_label, "label whose rationales are modeled");
  topics->add_option("--k", tp_cfg.k, "number of topics");
  topics->add_option("--iterations", tp_cfg.iterations, "Gibbs sweeps");
  topics->add_option("--beta", tp_cfg.beta, "topic-word prior");
  topics->add_option("--seed", tp_cfg.seed, "sampler seed")->required();
  topics->add_option("--top", tp_top, "words per topic");
  topics->add_option("--framework", tp_framework, "framework JSON (for boilerplate removal)")
      ->check(CLI::ExistingFile);
  topics->add_option("--out", tp_out, "report JSON (default: stdout)");

  // train
  std::string tr_ann, tr_corpus, tr_out;
  SplitArgs tr_split;
  vl::distill::TrainConfig tr_cfg;
  auto* train = app.add_subcommand("train", "train the built-in linear classifier");
  train->add_option("--annotations", tr_ann, "annotation JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--corpus", tr_corpus, "sentence store")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr_out, "model JSON")->required();
  train->add_option("--seed", tr_cfg.seed, "training seed")->required();
  add_split_flags(train, tr_split);
  train->add_option("--epochs", tr_cfg.epochs, "epochs");
  train->add_option("--lr", tr_cfg.learning_rate, "initial step size");
  train->add_option("--lr-decay", tr_cfg.lr_decay, "step size decay per epoch");
  train->add_option("--l2", tr_cfg.l2, "L2 penalty");
  train->add_option("--batch-size", tr_cfg.batch_size, "mini-batch size");
  train->add_option("--hash-bits", tr_cfg.hash_bits, "feature space is 2^bits");

  // eval
  std::string ev_ann, ev_corpus, ev_out;
  SplitArgs ev_split;
  int ev_trials = 1000;
  std::uint64_t ev_seed = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a model on its eval split with random baselines");
  eval->add_option("--model", ev_split.model, "model JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--annotations", ev_ann, "annotation JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--corpus", ev_corpus, "sentence store")->required()->check(CLI::ExistingFile);
  eval->add_option("--trials", ev_trials, "random baseline trials");
  eval->add_option("--baseline-seed", ev_seed, "random baseline seed");
  eval->add_option("--out", ev_out, "report JSON (default: stdout)");

  // predict
  std::string pr_model, pr_corpus, pr_out;
  std::size_t pr_resume = 0;
  auto* predict = app.add_subcommand("predict", "label every sentence in a store");
  predict->add_option("--model", pr_model, "model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--corpus", pr_corpus, "sentence store")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", pr_out, "prediction JSONL")->required();
  predict->add_option("--resume-from", pr_resume, "records already written");

  // eval-external
  std::string ee_pred, ee_ann, ee_corpus, ee_out;
  SplitArgs ee_split;
  auto* eval_ext = app.add_subcommand("eval-external", "evaluate predictions from an external backend");
  eval_ext->add_option("--predictions", ee_pred, "{sent_id, label} JSONL")->required()->check(CLI::ExistingFile);
  eval_ext->add_option("--annotations", ee_ann, "annotation JSONL")->required()->check(CLI::ExistingFile);
  eval_ext->add_option("--corpus", ee_corpus, "sentence store")->required()->check(CLI::ExistingFile);
  eval_ext->add_option("--model", ee_split.model, "take split parameters from this model")
      ->check(CLI::ExistingFile);
  add_split_flags(eval_ext, ee_split);
  eval_ext->add_option("--out", ee_out, "report JSON (default: stdout)");

  // serve-review
  std::string sr_ann, sr_corpus, sr_journal, sr_host = "127.0.0.1", sr_token, sr_origin = "*";
  std::size_t sr_batch = 1000;
  std::uint64_t sr_seed = 0;
  int sr_port = 8080;
  auto* serve = app.add_subcommand("serve-review", "HTTP service for human review");
  serve->add_option("--annotations", sr_ann, "annotation JSONL")->required()->check(CLI::ExistingFile);
  serve->add_option("--corpus", sr_corpus, "sentence store")->required()->check(CLI::ExistingFile);
  serve->add_option("--journal", sr_journal, "review journal JSONL")->required();
  serve->add_option("--batch-size", sr_batch, "items per batch");
  serve->add_option("--seed", sr_seed, "batch sampling seed")->required();
  serve->add_option("--host", sr_host, "bind address");
  serve->add_option("--port", sr_port, "port (0 picks a free one)");
  serve->add_option("--token", sr_token, "bearer token (default: $VALUELENS_REVIEW_TOKEN)");
  serve->add_option("--cors-origin", sr_origin, "Access-Control-Allow-Origin value");

  // validate-config
  std::string vc_path;
  auto* validate = app.add_subcommand("validate-config", "check a run configuration");
  validate->add_option("path", vc_path, "config JSON (default: --config)");

  // run
  std::string run_stages;
  bool run_force = false;
  auto* run = app.add_subcommand("run", "run pipeline stages from --config");
  run->add_option("--stages", run_stages, "comma-separated stages (default: all)");
  run->add_flag("--force", run_force, "ignore matching manifests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  vl::set_log_level(verbose ? vl::LogLevel::debug : quiet ? vl::LogLevel::warn : vl::LogLevel::info);

  try {
    if (ingest->parsed()) {
      const auto r = vl::corpus::ingest_documents(ingest_in, ingest_out);
      json errors = json::array();
      for (const auto& e : r.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
      print({{"n_documents", r.stats.n_documents}, {"n_sentences", r.stats.n_sentences}, {"errors", errors}});
    } else if (filter->parsed()) {
      const auto ks = vl::keywords::load_keywords(filter_kw);
      const auto records = vl::keywords::filter_corpus(filter_corpus, ks);
      vl::keywords::write_matches(filter_out, records);
      print({{"n_matches", records.size()}});
    } else if (sample->parsed()) {
      vl::keywords::SamplePlan plan;
      plan.rates = vl::keywords::parse_rates(sample_rates);
      plan.seed = sample_seed;
      plan.mode = sample_mode == "bernoulli" ? vl::keywords::SampleMode::bernoulli
                                             : vl::keywords::SampleMode::exact_count;
      const auto ids = vl::keywords::sample_by_tier(vl::keywords::read_matches(sample_matches), plan);
      vl::keywords::write_ids(sample_out, ids);
      print({{"n_selected", ids.size()}});
    } else if (annotate->parsed()) {
      const auto spec = vl::pipeline::load_framework_or_default(
          ann_framework.empty() ? std::nullopt : std::optional<fs::path>(ann_framework));
      const auto ids = vl::keywords::read_ids(ann_sample);
      const std::set<std::string> wanted(ids.begin(), ids.end());
      std::vector<vl::annotator::BatchItem> items;
      std::vector<std::string> texts;
      vl::corpus::for_each_sentence(ann_corpus, [&](const vl::corpus::Sentence& s) {
        if (wanted.count(s.sent_id)) {
          items.push_back({s.sent_id, s.text});
          texts.push_back(s.text);
        }
      });
      if (items.size() != wanted.size()) {
        throw vl::ValidationError("sample lists sentences absent from the corpus");
      }
      if (ann_dry) {
        print(vl::annotator::cost_to_json(vl::annotator::estimate_cost(
            static_cast<std::int64_t>(items.size()), spec, prices,
            vl::annotator::median_length_sentence(texts))));
        return 0;
      }
      if (ann_out.empty()) throw vl::ValidationError("--out is required unless --dry-run-cost is given");
      vl::annotator::GlmConfig glm = vl::annotator::config_from_env();
      if (ann_concurrency > 0) glm.max_concurrent = ann_concurrency;
      vl::annotator::validate(glm);
      std::unique_ptr<vl::annotator::GlmClient> client;
      if (!ann_mock.empty()) {
        client = vl::annotator::MockGlmClient::from_fixture_file(ann_mock);
      } else {
        if (glm.api_key.empty()) throw vl::ValidationError("GLM_API_KEY is not set");
        client = std::make_unique<vl::annotator::HttpGlmClient>(glm);
      }
      vl::annotator::AnnotationCache cache(ann_cache.empty() ? ann_out + ".journal" : ann_cache);
      vl::annotator::Annotator annotator(spec, *client, glm, cache);
      const auto summary = vl::annotator::annotate_batch(items, annotator);
      vl::annotator::write_annotations_sorted(ann_out, summary.annotations);
      vl::annotator::write_failures(ann_failures.empty() ? ann_out + ".failures" : ann_failures,
                                    summary.failed);
      print({{"done", summary.done}, {"cached", summary.cached}, {"failed", summary.failed.size()}});
      return summary.failed.empty() ? 0 : kExitRuntime;
    } else if (cost->parsed()) {
      const auto spec = vl::pipeline::load_framework_or_default(
          cost_framework.empty() ? std::nullopt : std::optional<fs::path>(cost_framework));
      std::vector<std::string> texts;
      if (!cost_sample.empty()) {
        if (cost_corpus.empty()) throw vl::ValidationError("--sample needs --corpus");
        const auto ids = vl::keywords::read_ids(cost_sample);
        const std::set<std::string> wanted(ids.begin(), ids.end());
        vl::corpus::for_each_sentence(cost_corpus, [&](const vl::corpus::Sentence& s) {
          if (wanted.count(s.sent_id)) texts.push_back(s.text);
        });
      }
      if (cost_n < 0 && texts.empty()) throw vl::ValidationError("give --n or --sample with --corpus");
      const std::int64_t n = cost_n >= 0 ? cost_n : static_cast<std::int64_t>(texts.size());
      print(vl::annotator::cost_to_json(vl::annotator::estimate_cost(
          n, spec, prices, vl::annotator::median_length_sentence(texts), completion_tokens)));
    } else if (prompt->parsed()) {
      const auto spec = vl::pipeline::load_framework_or_default(
          prompt_framework.empty() ? std::nullopt : std::optional<fs::path>(prompt_framework));
      print(vl::framework::messages_to_json(vl::framework::assemble_prompt(spec, prompt_sentence)));
    } else if (eval_rat->parsed()) {
      const auto spec = vl::pipeline::load_framework_or_default(
          er_framework.empty() ? std::nullopt : std::optional<fs::path>(er_framework));
      const auto report =
          vl::rationale_eval::diversity_report(vl::annotator::read_annotations(er_ann), spec);
      write_or_print(er_out, vl::rationale_eval::report_to_json(report));
    } else if (topics->parsed()) {
      const auto label = vl::resolve_label(tp_label);
      if (!label) throw vl::ValidationError("unknown label '" + tp_label + "'");
      const auto spec = vl::pipeline::load_framework_or_default(
          tp_framework.empty() ? std::nullopt : std::optional<fs::path>(tp_framework));
      std::vector<vl::text::TokenSeq> docs;
      for (const auto& a : vl::annotator::read_annotations(tp_ann)) {
        if (a.label == *label) {
          docs.push_back(vl::text::tokenize(vl::rationale_eval::rationale_body(a.rationale, spec.cot_trigger)));
        }
      }
      if (docs.empty()) throw vl::ValidationError("no annotations labeled " + tp_label);
      const auto model = vl::rationale_eval::lda_fit(docs, tp_cfg);
      json report = vl::rationale_eval::topic_report(model, tp_top);
      report["label"] = std::string(vl::label_code(*label));
      write_or_print(tp_out, report);
    } else if (train->parsed()) {
      const auto ds = dataset_from(tr_split, tr_ann, tr_corpus);
      std::vector<vl::distill::Example> examples;
      for (const auto& item : ds.subset(vl::distill::Split::train)) {
        examples.push_back({vl::distill::featurize(item.text, tr_cfg.hash_bits), item.label});
      }
      auto result = vl::distill::train_linear(examples, ds.classes, tr_cfg);
      result.model.provenance = {{"task", std::string(vl::distill::task_name(ds.task))},
                                 {"split_ratio", ds.split_ratio},
                                 {"split_seed", ds.seed},
                                 {"annotations_sha256", vl::sha256_file(tr_ann)}};
      vl::distill::save_model(tr_out, result.model);
      print({{"n_train", examples.size()},
             {"n_eval", ds.items.size() - examples.size()},
             {"epoch_objective", result.epoch_objective}});
    } else if (eval->parsed()) {
      const auto model = vl::distill::load_model(ev_split.model);
      const auto ds = dataset_from(ev_split, ev_ann, ev_corpus);
      std::vector<int> truth;
      for (const auto& item : ds.subset(vl::distill::Split::eval)) truth.push_back(item.label);
      using vl::distill::BaselineMode;
      write_or_print(ev_out,
                     {{"model", vl::distill::report_to_json(vl::distill::evaluate_model(model, ds))},
                      {"random_uniform", vl::distill::report_to_json(vl::distill::random_baseline(
                                             truth, ds.classes, BaselineMode::uniform, ev_seed, ev_trials))},
                      {"random_biased", vl::distill::report_to_json(vl::distill::random_baseline(
                                            truth, ds.classes, BaselineMode::biased, ev_seed, ev_trials))},
                      {"baseline_trials", ev_trials}});
    } else if (predict->parsed()) {
      const auto n = vl::distill::predict_batch(vl::distill::load_model(pr_model), pr_corpus, pr_out,
                                                pr_resume);
      print({{"n_records", n}});
    } else if (eval_ext->parsed()) {
      const auto ds = dataset_from(ee_split, ee_ann, ee_corpus);
      write_or_print(ee_out,
                     vl::distill::report_to_json(vl::distill::import_external_predictions(ee_pred, ds)));
    } else if (serve->parsed()) {
      if (sr_token.empty()) {
        if (const char* env = std::getenv("VALUELENS_REVIEW_TOKEN")) sr_token = env;
      }
      if (sr_token.empty()) throw vl::ValidationError("a bearer token is required (--token)");
      vl::review::ReviewStore store(vl::annotator::read_annotations(sr_ann), texts_for(sr_corpus),
                                    sr_journal);
      std::string batch_id;
      if (auto existing = store.find_batch(sr_batch, sr_seed)) {
        batch_id = *existing;
      } else {
        batch_id = store.enqueue_sample(sr_batch, sr_seed);
      }
      vl::review::ReviewServer server(store, sr_token, sr_origin);
      const int port = server.bind(sr_host, sr_port);
      if (port < 0) throw std::runtime_error("cannot bind " + sr_host + ":" + std::to_string(sr_port));
      print({{"batch_id", batch_id}, {"host", sr_host}, {"port", port}});
      std::cout.flush();
      server.listen();
    } else if (validate->parsed()) {
      const std::string path = vc_path.empty() ? config_path : vc_path;
      if (path.empty()) throw vl::ValidationError("give a config path or --config");
      if (!fs::is_regular_file(path)) throw vl::ValidationError("config not found: " + path);
      json j;
      try {
        j = json::parse(vl::read_file(path));
      } catch (const json::exception& e) {
        throw vl::ValidationError(std::string("config is not valid JSON: ") + e.what());
      }
      const auto errors = vl::pipeline::config_errors(j, fs::absolute(path).parent_path());
      print({{"ok", errors.empty()}, {"errors", errors}});
      return errors.empty() ? 0 : kExitValidation;
    } else if (run->parsed()) {
      if (config_path.empty()) throw vl::ValidationError("run needs --config");
      const auto cfg = vl::pipeline::load_config(config_path);
      std::vector<std::string> stages;
      if (run_stages.empty()) {
        stages = vl::pipeline::stage_names();
      } else {
        std::stringstream ss(run_stages);
        for (std::string s; std::getline(ss, s, ',');) {
          if (!s.empty()) stages.push_back(s);
        }
      }
      vl::pipeline::RunOptions options;
      options.force = run_force;
      print(vl::pipeline::summary_to_json(vl::pipeline::run_pipeline(cfg, stages, options)));
    }
  } catch (const vl::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return kExitValidation;
  } catch (const vl::corpus::DuplicateDocumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
