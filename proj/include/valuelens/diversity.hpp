#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "valuelens/annotator.hpp"
#include "valuelens/bleu.hpp"
#include "valuelens/framework.hpp"
#include "valuelens/label.hpp"

namespace valuelens::rationale_eval {

using RationalesByLabel = std::map<Label, std::vector<text::TokenSeq>>;

// Mean BLEU over all ordered pairs (i, j), i != j. nullopt for fewer than two
// items. Pair scores are summed in sorted order, so the result does not depend
// on input order.
std::optional<double> mean_pairwise_bleu(const std::vector<text::TokenSeq>& items,
                                         const BleuConfig& cfg);

// Mean over `generated` of the max BLEU against any of `provided`.
double mean_max_bleu(const std::vector<text::TokenSeq>& generated,
                     const std::vector<text::TokenSeq>& provided, const BleuConfig& cfg);

// Categories with fewer than two rationales are omitted (with a warning).
std::map<Label, double> provided_pairwise_diversity(const RationalesByLabel& provided,
                                                    const BleuConfig& cfg = {});
std::map<Label, double> generated_pairwise_diversity(const RationalesByLabel& generated,
                                                     const BleuConfig& cfg = {});

// Per category with generated rationales. Throws ValidationError naming any
// such category that has no provided rationales.
std::map<Label, double> faithfulness(const RationalesByLabel& generated,
                                     const RationalesByLabel& provided,
                                     const BleuConfig& cfg = {});

struct CategoryDiversity {
  std::optional<double> provided_pairwise;
  std::optional<double> gen_vs_provided_max_avg;
  std::optional<double> generated_pairwise;
  std::size_t n_provided = 0;
  std::size_t n_generated = 0;
};

struct DiversityReport {
  std::map<Label, CategoryDiversity> categories;
};

// Drops a leading chain-of-thought trigger and the trailing "Based on these
// considerations, I would categorize this sentence as: ..." sentence, which
// every rationale shares by construction.
std::string rationale_body(std::string_view rationale, std::string_view cot_trigger);

struct DiversityOptions {
  BleuConfig bleu;
  bool strip_boilerplate = true;
};

DiversityReport diversity_report(const std::vector<annotator::Annotation>& generated,
                                 const framework::FrameworkSpec& spec,
                                 const DiversityOptions& options = {});

json report_to_json(const DiversityReport& report);

}  // namespace valuelens::rationale_eval
