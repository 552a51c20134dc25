#include "valuelens/diversity.hpp"

#include <algorithm>
#include <numeric>

namespace valuelens::rationale_eval {

namespace {

double sorted_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::map<Label, double> pairwise_by_label(const RationalesByLabel& groups, const BleuConfig& cfg,
                                          std::string_view what) {
  std::map<Label, double> out;
  for (const auto& [label, items] : groups) {
    if (auto mean = mean_pairwise_bleu(items, cfg)) {
      out[label] = *mean;
    } else {
      log_warn(std::string(what) + " rationales for " + std::string(label_code(label)) +
               ": fewer than two, category omitted");
    }
  }
  return out;
}

}  // namespace

std::optional<double> mean_pairwise_bleu(const std::vector<text::TokenSeq>& items,
                                         const BleuConfig& cfg) {
  if (items.size() < 2) return std::nullopt;
  std::vector<double> scores;
  scores.reserve(items.size() * (items.size() - 1));
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (i != j) scores.push_back(bleu(items[i], items[j], cfg));
    }
  }
  return sorted_mean(std::move(scores));
}

double mean_max_bleu(const std::vector<text::TokenSeq>& generated,
                     const std::vector<text::TokenSeq>& provided, const BleuConfig& cfg) {
  std::vector<double> maxima;
  maxima.reserve(generated.size());
  for (const auto& g : generated) {
    double best = 0.0;
    for (const auto& p : provided) best = std::max(best, bleu(g, p, cfg));
    maxima.push_back(best);
  }
  return maxima.empty() ? 0.0 : sorted_mean(std::move(maxima));
}

std::map<Label, double> provided_pairwise_diversity(const RationalesByLabel& provided,
                                                    const BleuConfig& cfg) {
  return pairwise_by_label(provided, cfg, "provided");
}

std::map<Label, double> generated_pairwise_diversity(const RationalesByLabel& generated,
                                                     const BleuConfig& cfg) {
  return pairwise_by_label(generated, cfg, "generated");
}

std::map<Label, double> faithfulness(const RationalesByLabel& generated,
                                     const RationalesByLabel& provided, const BleuConfig& cfg) {
  std::map<Label, double> out;
  for (const auto& [label, items] : generated) {
    if (items.empty()) continue;
    const auto it = provided.find(label);
    if (it == provided.end() || it->second.empty()) {
      throw ValidationError("no provided rationales for category " +
                            std::string(label_code(label)));
    }
    out[label] = mean_max_bleu(items, it->second, cfg);
  }
  return out;
}

std::string rationale_body(std::string_view rationale, std::string_view cot_trigger) {
  std::string_view body = text::trim(rationale);
  if (!cot_trigger.empty() && body.substr(0, cot_trigger.size()) == cot_trigger) {
    body.remove_prefix(cot_trigger.size());
  }
  static constexpr std::string_view kSuffixStart =
      "based on these considerations, i would categorize this sentence as:";
  const std::string lower = text::to_lower_ascii(body);
  const auto pos = lower.rfind(kSuffixStart);
  if (pos != std::string::npos) body = body.substr(0, pos);
  return std::string(text::trim(body));
}

DiversityReport diversity_report(const std::vector<annotator::Annotation>& generated,
                                 const framework::FrameworkSpec& spec,
                                 const DiversityOptions& options) {
  auto prepare = [&](std::string_view rationale) {
    return text::tokenize(options.strip_boilerplate ? rationale_body(rationale, spec.cot_trigger)
                                                    : std::string(rationale));
  };
  RationalesByLabel provided;
  for (const auto& ex : spec.exemplars) provided[ex.label].push_back(prepare(ex.rationale));
  RationalesByLabel gen;
  for (const auto& a : generated) gen[a.label].push_back(prepare(a.rationale));

  DiversityReport report;
  for (Label l : kLabels) {
    auto& cat = report.categories[l];
    cat.n_provided = provided.count(l) ? provided[l].size() : 0;
    cat.n_generated = gen.count(l) ? gen[l].size() : 0;
  }
  for (const auto& [l, v] : provided_pairwise_diversity(provided, options.bleu)) {
    report.categories[l].provided_pairwise = v;
  }
  for (const auto& [l, v] : faithfulness(gen, provided, options.bleu)) {
    report.categories[l].gen_vs_provided_max_avg = v;
  }
  for (const auto& [l, v] : generated_pairwise_diversity(gen, options.bleu)) {
    report.categories[l].generated_pairwise = v;
  }
  return report;
}

json report_to_json(const DiversityReport& report) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json cats = json::array();
  for (const auto& [label, c] : report.categories) {
    cats.push_back({{"category", std::string(label_code(label))},
                    {"provided_pairwise", opt(c.provided_pairwise)},
                    {"gen_vs_provided_max_avg", opt(c.gen_vs_provided_max_avg)},
                    {"generated_pairwise", opt(c.generated_pairwise)},
                    {"n_provided", c.n_provided},
                    {"n_generated", c.n_generated}});
  }
  return json{{"categories", cats}};
}

}  // namespace valuelens::rationale_eval
