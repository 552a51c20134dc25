#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "valuelens/common.hpp"

namespace valuelens::distill {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double support = 0.0;  // true items of this class
};

struct EvalReport {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  // confusion[truth][predicted]; fractional only in averaged baseline reports
  std::vector<std::vector<double>> confusion;
  std::size_t n_eval = 0;
};

// Zero denominators give 0 for precision, recall and F1. Throws
// ValidationError on length mismatch, empty input or out-of-range labels.
EvalReport evaluate(const std::vector<int>& truth, const std::vector<int>& predicted,
                    const std::vector<std::string>& classes);

enum class BaselineMode { uniform, biased };

// Random predictors averaged over `trials`: uniform draws each class with
// probability 1/K; biased draws with the class frequencies of `truth`.
EvalReport random_baseline(const std::vector<int>& truth, const std::vector<std::string>& classes,
                           BaselineMode mode, std::uint64_t seed, int trials);

json report_to_json(const EvalReport& r);

}  // namespace valuelens::distill
