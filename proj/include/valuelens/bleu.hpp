#pragma once

#include <cstddef>
#include <vector>

#include "valuelens/text.hpp"

namespace valuelens::rationale_eval {

struct BleuConfig {
  int max_order = 4;
  // Empty means uniform 1/max_order.
  std::vector<double> weights;
  // Off by default: a zero n-gram precision with positive weight gives 0.
  // When on, zero matched counts are replaced by `smoothing_epsilon`.
  bool smoothing = false;
  double smoothing_epsilon = 0.1;

  std::vector<double> effective_weights() const;
};

// Throws ValidationError unless max_order >= 1, weights (if given) have
// max_order non-negative entries summing to 1 within 1e-12.
void validate(const BleuConfig& cfg);

struct NgramPrecision {
  std::size_t matched = 0;  // clipped by reference counts
  std::size_t total = 0;    // candidate n-grams of this order
};

NgramPrecision modified_precision(const text::TokenSeq& candidate,
                                  const text::TokenSeq& reference, int n);

// Sentence-level BLEU of `candidate` against a single reference:
//   BP * exp(sum_n w_n * log p_n),  BP = 1 if c >= r else exp(1 - r/c).
// Empty candidate or reference scores 0 and logs a warning. Not symmetric.
double bleu(const text::TokenSeq& candidate, const text::TokenSeq& reference,
            const BleuConfig& cfg = {});

}  // namespace valuelens::rationale_eval
