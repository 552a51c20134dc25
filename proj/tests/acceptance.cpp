// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"
#include "valuelens/annotator.hpp"
#include "valuelens/diversity.hpp"
#include "valuelens/features.hpp"
#include "valuelens/framework.hpp"
#include "valuelens/keywords.hpp"
#include "valuelens/lda.hpp"
#include "valuelens/linear_model.hpp"
#include "valuelens/metrics.hpp"
#include "valuelens/pipeline.hpp"
#include "valuelens/review.hpp"

using namespace valuelens;
namespace re = valuelens::rationale_eval;

namespace {

using Failures = std::vector<std::string>;

class Check {
 public:
  explicit Check(Failures& out) : out_(out) {}
  void operator()(bool ok, const std::string& what) {
    if (!ok) out_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream os;
      os << std::setprecision(12) << what << ": got " << got << ", want " << want << " +- " << tol;
      out_.push_back(os.str());
    }
  }

 private:
  Failures& out_;
};

re::BleuConfig order(int n) {
  re::BleuConfig c;
  c.max_order = n;
  return c;
}

Failures bleu_suite() {
  Failures f;
  Check check(f);
  const auto cand = text::tokenize("the cat sat on the mat");
  const auto ref = text::tokenize("the cat is on the mat");
  check.near(re::bleu(cand, ref, order(2)), std::sqrt(5.0 / 6.0 * 3.0 / 5.0), 1e-12, "cat/mat N=2 vs formula");
  check.near(re::bleu(cand, ref, order(2)), 0.70711, 1e-5, "cat/mat N=2");
  check.near(re::bleu(cand, ref, order(2)), oracle::bleu(cand, ref, 2), 1e-12, "cat/mat N=2 vs oracle");
  check(re::bleu(cand, ref, order(4)) == 0.0, "cat/mat N=4 is exactly 0");
  check(oracle::bleu(cand, ref, 4) == 0.0, "oracle agrees on N=4");
  check.near(re::bleu(cand, cand), 1.0, 1e-12, "identity");
  check(re::bleu(text::tokenize("alpha beta gamma delta"), text::tokenize("one two three four")) == 0.0,
        "disjoint vocabulary");
  return f;
}

// Twelve generated rationales over the three labels, against hand-written
// provided rationales. Generated texts overlap on purpose.
std::pair<re::RationalesByLabel, re::RationalesByLabel> diversity_fixture() {
  re::RationalesByLabel generated, provided;
  const auto w = [](const char* s) { return oracle::words(s); };
  generated[Label::d_pve] = {w("the invention protects patient privacy by encrypting health records"),
                             w("the invention improves patient safety by monitoring vital signs"),
                             w("the device protects privacy of users by encrypting stored records"),
                             w("the invention reduces energy use which benefits the environment")};
  generated[Label::c_pve] = {w("the sentence notes that data breaches harm patients but not how the invention helps"),
                             w("the sentence mentions climate change as a concern without linking the invention"),
                             w("the sentence notes that accidents harm drivers but not how the device helps"),
                             w("the background describes privacy risks without tying them to the invention")};
  generated[Label::no_pve] = {w("the sentence describes a gear and a shaft with no public value"),
                              w("the sentence lists circuit components and expresses no value"),
                              w("the sentence describes a gear train with no public value"),
                              w("the sentence is a purely technical description of a valve")};
  provided[Label::d_pve] = {w("the invention protects privacy of patients which is a public value"),
                            w("the invention improves safety for workers in factories")};
  provided[Label::c_pve] = {w("the sentence notes a societal problem without linking the invention to it"),
                            w("the sentence describes a risk to people but not the invention")};
  provided[Label::no_pve] = {w("the sentence describes technical components with no public value"),
                             w("the sentence is a technical description only")};
  return {generated, provided};
}

Failures diversity_suite() {
  Failures f;
  Check check(f);
  auto [generated, provided] = diversity_fixture();
  std::size_t n = 0;
  for (const auto& [label, items] : generated) n += items.size();
  check(n == 12, "fixture has 12 generated rationales");
  for (int max_n : {1, 2, 4}) {
    const auto cfg = order(max_n);
    const auto pw = re::generated_pairwise_diversity(generated, cfg);
    const auto pp = re::provided_pairwise_diversity(provided, cfg);
    const auto fa = re::faithfulness(generated, provided, cfg);
    for (Label l : kLabels) {
      const std::string tag = std::string(label_code(l)) + " N=" + std::to_string(max_n);
      const double want_pw = oracle::mean_pairwise(generated[l], static_cast<std::size_t>(max_n));
      const double want_pp = oracle::mean_pairwise(provided[l], static_cast<std::size_t>(max_n));
      const double want_fa = oracle::mean_max(generated[l], provided[l], static_cast<std::size_t>(max_n));
      check.near(pw.at(l), want_pw, 1e-9, "generated pairwise " + tag);
      check.near(pp.at(l), want_pp, 1e-9, "provided pairwise " + tag);
      check.near(fa.at(l), want_fa, 1e-9, "faithfulness " + tag);
      for (double v : {pw.at(l), pp.at(l), fa.at(l)}) check(v >= 0.0 && v <= 1.0, "value in [0,1] " + tag);
    }
    Rng rng(static_cast<std::uint64_t>(max_n));
    for (int trial = 0; trial < 5; ++trial) {
      auto g = generated;
      auto p = provided;
      for (auto& [label, items] : g) rng.shuffle(items);
      for (auto& [label, items] : p) rng.shuffle(items);
      check(re::generated_pairwise_diversity(g, cfg) == pw, "pairwise is ordering-invariant");
      check(re::faithfulness(g, p, cfg) == fa, "faithfulness is ordering-invariant");
    }
  }
  return f;
}

Failures lda_suite() {
  Failures f;
  Check check(f);
  Rng rng(2024);
  std::vector<text::TokenSeq> docs;
  for (int d = 0; d < 200; ++d) {
    const std::string block = d % 2 == 0 ? "alpha" : "omega";
    text::TokenSeq doc;
    for (int i = 0; i < 30; ++i) doc.push_back(block + std::to_string(rng.below(20)));
    docs.push_back(doc);
  }
  re::LdaConfig cfg;
  cfg.k = 2;
  cfg.iterations = 200;
  cfg.seed = 11;
  const auto a = re::lda_fit(docs, cfg);
  const auto b = re::lda_fit(docs, cfg);
  const auto tops = re::top_words(a, 5);
  std::set<std::string> blocks_seen;
  for (const auto& words : tops) {
    std::set<std::string> blocks;
    for (const auto& word : words) blocks.insert(word.substr(0, 5));
    check(blocks.size() == 1, "top-5 words of a topic come from one vocabulary");
    blocks_seen.insert(blocks.begin(), blocks.end());
  }
  check(blocks_seen.size() == 2, "the two topics cover both vocabularies");
  for (const auto& row : a.topic_word) {
    check.near(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9, "topic-word row sum");
  }
  for (const auto& row : a.doc_topic) {
    check.near(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9, "doc-topic row sum");
  }
  check(a.topic_word == b.topic_word && a.doc_topic == b.doc_topic, "same seed gives identical output");
  return f;
}

std::vector<keywords::MatchRecord> tier_one(std::size_t n) {
  std::vector<keywords::MatchRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    char id[40];
    std::snprintf(id, sizeof id, "US%07zu:abstract:00000", i);
    out.push_back({id, {"security"}, 1});
  }
  return out;
}

Failures sampling_suite() {
  Failures f;
  Check check(f);
  const auto records = tier_one(10000);
  keywords::SamplePlan plan;
  plan.rates = {0.045, 1.0, 1.0, 1.0};
  int within = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    plan.seed = seed;
    const auto n = keywords::sample_by_tier(records, plan).size();
    within += n >= 360 && n <= 540;
  }
  check(within >= 990, "count in [360, 540] for " + std::to_string(within) + " of 1000 seeds");
  plan.rates = {1.0, 1.0, 1.0, 1.0};
  check(keywords::sample_by_tier(records, plan).size() == records.size(), "rate 1.0 selects all");

  plan.rates = {0.045, 1.0, 1.0, 1.0};
  plan.seed = 42;
  testing::TempDir dir;
  keywords::write_ids(dir / "a.txt", keywords::sample_by_tier(records, plan));
  keywords::write_ids(dir / "b.txt", keywords::sample_by_tier(records, plan));
  const auto a = testing::read_text(dir / "a.txt");
  check(!a.empty() && a == testing::read_text(dir / "b.txt"), "fixed seed gives byte-identical samples");
  return f;
}

Failures prompt_suite() {
  Failures f;
  Check check(f);
  const auto spec = framework::default_framework();
  const auto msgs =
      framework::assemble_prompt(spec, "The system reduces the risk of data breaches for hospital patients.");
  check(framework::messages_to_json(msgs).dump(2) + "\n" ==
            testing::read_text(testing::source_dir() / "golden" / "default_prompt.json"),
        "assembled prompt is byte-identical to the golden file");
  check(spec.exemplars.size() == 14, "14 exemplars");
  check(msgs.size() == 30, "30 messages");
  std::size_t k = 0;
  for (const auto& m : msgs) {
    if (m.role != framework::Role::assistant) continue;
    if (k >= spec.exemplars.size()) break;
    const auto want = spec.exemplars[k].label;
    const auto parsed = annotator::try_parse_response(m.content);
    check(parsed && parsed->label == want, "exemplar " + std::to_string(k + 1) + " label recovered");
    ++k;
  }
  check(k == spec.exemplars.size(), "one assistant turn per exemplar");
  return f;
}

Failures classifier_suite() {
  Failures f;
  Check check(f);
  const int bits = 6;
  Rng rng(8);
  auto m = distill::LinearModel::zeros({"a", "b", "c"}, bits);
  for (auto& row : m.weights) {
    for (double& w : row) w = rng.uniform() - 0.5;
  }
  for (double& b : m.bias) b = rng.uniform() - 0.5;
  std::vector<distill::Example> data;
  for (int i = 0; i < 20; ++i) {
    data.push_back({distill::featurize("w" + std::to_string(rng.below(9)) + " w" + std::to_string(rng.below(9)), bits),
                    static_cast<int>(rng.below(3))});
  }
  const double l2 = 0.01;
  const auto g = distill::gradient(m, data, l2);
  int checked = 0;
  for (int trial = 0; checked < 5 && trial < 500; ++trial) {
    const auto c = rng.below(3);
    const auto i = data[rng.below(data.size())].x.entries[0].first;
    const double analytic = g.weights[c][i];
    if (std::abs(analytic) < 1e-4) continue;
    const double h = 1e-5;
    auto plus = m;
    plus.weights[c][i] += h;
    auto minus = m;
    minus.weights[c][i] -= h;
    const double numeric = (distill::objective(plus, data, l2) - distill::objective(minus, data, l2)) / (2 * h);
    const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
    check(rel < 1e-4, "gradient coordinate relative error " + std::to_string(rel));
    ++checked;
  }
  check(checked == 5, "five coordinates checked");

  const std::vector<std::string> va = {"solar", "water", "clean", "health", "safety", "privacy"};
  const std::vector<std::string> vb = {"gear", "shaft", "bolt", "circuit", "register", "buffer"};
  distill::TrainConfig cfg;
  cfg.hash_bits = 12;
  cfg.epochs = 20;
  cfg.seed = 3;
  std::vector<distill::Example> sep;
  Rng srng(17);
  for (int i = 0; i < 60; ++i) {
    const auto& vocab = i % 2 == 0 ? va : vb;
    std::string s;
    for (int t = 0; t < 4; ++t) s += vocab[srng.below(vocab.size())] + " ";
    sep.push_back({distill::featurize(s, cfg.hash_bits), i % 2});
  }
  const auto r = distill::train_linear(sep, {"A", "B"}, cfg);
  std::size_t right = 0;
  for (const auto& ex : sep) right += r.model.predict(ex.x) == ex.y;
  check(right == sep.size(), "separable set: train accuracy 1.0 within 20 epochs");

  const auto rep = distill::evaluate({0, 0, 1, 1, 2, 2}, {0, 1, 1, 1, 2, 0}, {"A", "B", "C"});
  check.near(rep.macro_f1, 0.6556, 1e-4, "confusion-matrix example macro F1");
  const auto o = oracle::prf({0, 0, 1, 1, 2, 2}, {0, 1, 1, 1, 2, 0}, 3);
  check.near(rep.macro_f1, (o[0].f1 + o[1].f1 + o[2].f1) / 3.0, 1e-12, "macro F1 vs oracle");
  return f;
}

Failures baseline_suite() {
  Failures f;
  Check check(f);
  std::vector<int> balanced;
  for (int i = 0; i < 300; ++i) balanced.push_back(i % 3);
  const auto u = distill::random_baseline(balanced, {"A", "B", "C"}, distill::BaselineMode::uniform, 1, 10000);
  check.near(u.accuracy, 1.0 / 3.0, 0.01, "uniform baseline accuracy");
  std::vector<int> skewed;
  for (int i = 0; i < 100; ++i) skewed.push_back(i < 50 ? 0 : i < 80 ? 1 : 2);
  const auto b = distill::random_baseline(skewed, {"A", "B", "C"}, distill::BaselineMode::biased, 2, 10000);
  check.near(b.accuracy, 0.5 * 0.5 + 0.3 * 0.3 + 0.2 * 0.2, 0.01, "biased baseline accuracy");
  return f;
}

Failures e2e_suite() {
  Failures f;
  Check check(f);
  testing::TempDir dir;
  fs::copy(testing::fixture("e2e"), dir.path(), fs::copy_options::recursive);
  const auto cfg = pipeline::load_config(dir / "config.json");
  const auto fixture = testing::fixture("e2e") / "mock_glm.json";

  auto client = annotator::MockGlmClient::from_fixture_file(fixture);
  pipeline::RunOptions options;
  options.client = client.get();
  const auto first = pipeline::run_pipeline(cfg, pipeline::stage_names(), options);
  check(first.size() == pipeline::stage_names().size(), "all stages reported");
  for (const auto& s : first) {
    check(!s.skipped, "stage " + s.stage + " ran");
    if (s.stage == "annotate") {
      check(s.details.value("failed", -1) == 0, "zero annotation failures");
      check(s.details.value("done", 0) == 100, "100 sentences annotated");
    }
    if (s.stage == "predict") check(s.details.value("n_records", 0) == 100, "100 predictions");
    if (s.stage == "eval") {
      const double f1 = s.details.value("macro_f1", 0.0);
      check(f1 >= 0.95, "macro F1 " + std::to_string(f1) + " >= 0.95");
    }
  }
  for (const auto& stage : pipeline::stage_names()) {
    check(fs::is_regular_file(cfg.workdir / stage / "manifest.json"), "manifest for " + stage);
  }

  auto again = annotator::MockGlmClient::from_fixture_file(fixture);
  options.client = again.get();
  for (const auto& s : pipeline::run_pipeline(cfg, pipeline::stage_names(), options)) {
    check(s.skipped, "rerun skips " + s.stage);
  }
  check(again->calls() == 0, "rerun makes zero GLM calls");
  return f;
}

Failures agreement_suite() {
  Failures f;
  Check check(f);
  review::LabelMap a, b;
  for (int i = 0; i < 50; ++i) {
    const std::string id = "item" + std::to_string(i);
    a[id] = kLabels[i % 3];
    b[id] = i < 39 ? a[id] : kLabels[(i + 1) % 3];
  }
  const auto ab = review::agreement(a, b);
  const auto ba = review::agreement(b, a);
  check(ab.n_compared == 50, "50 items compared");
  check(ab.percent_agreement && std::abs(*ab.percent_agreement - 78.0) < 1e-12, "39 of 50 gives 78.0%");
  check(ab.percent_agreement == ba.percent_agreement && ab.cohens_kappa == ba.cohens_kappa, "symmetric");
  const auto none = review::agreement({{"x", Label::d_pve}}, {{"y", Label::d_pve}});
  check(!none.percent_agreement && !none.cohens_kappa, "empty intersection gives null");
  return f;
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Failures()> run;
};

}  // namespace

int main() {
  set_log_level(LogLevel::error);
  const std::vector<Criterion> criteria = {
      {"bleu-oracle", 1.0, bleu_suite},
      {"diversity-faithfulness", 1.0, diversity_suite},
      {"lda-planted-topics", 30.0, lda_suite},
      {"tiered-sampling", 10.0, sampling_suite},
      {"prompt-golden", 5.0, prompt_suite},
      {"classifier-gradient-and-metrics", 30.0, classifier_suite},
      {"random-baselines", 30.0, baseline_suite},
      {"end-to-end-smoke", 120.0, e2e_suite},
      {"agreement", 1.0, agreement_suite},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Failures problems;
    try {
      problems = c.run();
    } catch (const std::exception& e) {
      problems.push_back(std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      problems.push_back("took " + std::to_string(secs) + " s, budget " + std::to_string(c.budget_s) + " s");
    }
    std::cout << (problems.empty() ? "[PASS] " : "[FAIL] ") << c.name << " (" << std::fixed
              << std::setprecision(3) << secs << " s)\n";
    for (const auto& p : problems) std::cout << "       - " << p << '\n';
    failed += !problems.empty();
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " acceptance criteria passed\n";
  return failed == 0 ? 0 : 1;
}
