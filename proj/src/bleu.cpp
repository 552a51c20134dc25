#include "valuelens/bleu.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "valuelens/common.hpp"

namespace valuelens::rationale_eval {

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const text::TokenSeq& tokens, int n) {
  NgramCounts counts;
  const auto order = static_cast<std::size_t>(n);
  if (tokens.size() < order) return counts;
  std::string key;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    key.clear();
    for (std::size_t j = 0; j < order; ++j) {
      if (j > 0) key.push_back('\x1f');
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

std::vector<double> BleuConfig::effective_weights() const {
  if (!weights.empty()) return weights;
  return std::vector<double>(static_cast<std::size_t>(std::max(max_order, 1)),
                             1.0 / static_cast<double>(std::max(max_order, 1)));
}

void validate(const BleuConfig& cfg) {
  if (cfg.max_order < 1) throw ValidationError("BLEU max_order must be >= 1");
  if (cfg.weights.empty()) return;
  if (cfg.weights.size() != static_cast<std::size_t>(cfg.max_order)) {
    throw ValidationError("BLEU weights must have max_order entries");
  }
  double sum = 0.0;
  for (double w : cfg.weights) {
    if (!(w >= 0.0)) throw ValidationError("BLEU weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("BLEU weights must sum to 1");
}

NgramPrecision modified_precision(const text::TokenSeq& candidate,
                                  const text::TokenSeq& reference, int n) {
  NgramPrecision p;
  const NgramCounts cand = count_ngrams(candidate, n);
  const NgramCounts ref = count_ngrams(reference, n);
  for (const auto& [gram, count] : cand) {
    p.total += count;
    const auto it = ref.find(gram);
    if (it != ref.end()) p.matched += std::min(count, it->second);
  }
  return p;
}

double bleu(const text::TokenSeq& candidate, const text::TokenSeq& reference,
            const BleuConfig& cfg) {
  validate(cfg);
  if (candidate.empty() || reference.empty()) {
    log_warn("BLEU of an empty sequence is defined as 0");
    return 0.0;
  }
  const std::vector<double> weights = cfg.effective_weights();
  double log_sum = 0.0;
  for (int n = 1; n <= cfg.max_order; ++n) {
    const double w = weights[static_cast<std::size_t>(n - 1)];
    if (w == 0.0) continue;
    const NgramPrecision p = modified_precision(candidate, reference, n);
    double matched = static_cast<double>(p.matched);
    if (p.total == 0) return 0.0;
    if (p.matched == 0) {
      if (!cfg.smoothing) return 0.0;
      matched = cfg.smoothing_epsilon;
    }
    log_sum += w * std::log(matched / static_cast<double>(p.total));
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

}  // namespace valuelens::rationale_eval
