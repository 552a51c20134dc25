#include "valuelens/metrics.hpp"

#include <algorithm>

namespace valuelens::distill {

namespace {

void fill_from_confusion(EvalReport& r) {
  const std::size_t K = r.classes.size();
  r.per_class.assign(K, {});
  double total = 0.0;
  double trace = 0.0;
  for (std::size_t t = 0; t < K; ++t) {
    for (std::size_t p = 0; p < K; ++p) total += r.confusion[t][p];
    trace += r.confusion[t][t];
  }
  for (std::size_t c = 0; c < K; ++c) {
    double predicted = 0.0;
    double actual = 0.0;
    for (std::size_t o = 0; o < K; ++o) {
      predicted += r.confusion[o][c];
      actual += r.confusion[c][o];
    }
    const double tp = r.confusion[c][c];
    ClassMetrics& m = r.per_class[c];
    m.support = actual;
    m.precision = predicted > 0.0 ? tp / predicted : 0.0;
    m.recall = actual > 0.0 ? tp / actual : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    r.macro_precision += m.precision / static_cast<double>(K);
    r.macro_recall += m.recall / static_cast<double>(K);
    r.macro_f1 += m.f1 / static_cast<double>(K);
  }
  r.accuracy = total > 0.0 ? trace / total : 0.0;
}

}  // namespace

EvalReport evaluate(const std::vector<int>& truth, const std::vector<int>& predicted,
                    const std::vector<std::string>& classes) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("truth and prediction counts differ");
  }
  if (truth.empty()) throw ValidationError("evaluation set is empty");
  const std::size_t K = classes.size();
  EvalReport r;
  r.classes = classes;
  r.n_eval = truth.size();
  r.confusion.assign(K, std::vector<double>(K, 0.0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (truth[i] < 0 || predicted[i] < 0 || t >= K || p >= K) {
      throw ValidationError("label index out of range");
    }
    r.confusion[t][p] += 1.0;
  }
  fill_from_confusion(r);
  return r;
}

EvalReport random_baseline(const std::vector<int>& truth, const std::vector<std::string>& classes,
                           BaselineMode mode, std::uint64_t seed, int trials) {
  if (trials < 1) throw ValidationError("trials must be >= 1");
  if (truth.empty()) throw ValidationError("evaluation set is empty");
  const std::size_t K = classes.size();
  std::vector<double> cumulative(K, 0.0);
  if (mode == BaselineMode::biased) {
    for (int t : truth) cumulative.at(static_cast<std::size_t>(t)) += 1.0;
    for (std::size_t c = 1; c < K; ++c) cumulative[c] += cumulative[c - 1];
    for (double& v : cumulative) v /= static_cast<double>(truth.size());
  }

  Rng rng(seed);
  EvalReport mean;
  mean.classes = classes;
  mean.n_eval = truth.size();
  mean.per_class.assign(K, {});
  mean.confusion.assign(K, std::vector<double>(K, 0.0));
  std::vector<int> predicted(truth.size());
  const double w = 1.0 / trials;
  for (int trial = 0; trial < trials; ++trial) {
    for (int& p : predicted) {
      if (mode == BaselineMode::uniform) {
        p = static_cast<int>(rng.below(K));
      } else {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        p = static_cast<int>(std::min<std::size_t>(
            static_cast<std::size_t>(it - cumulative.begin()), K - 1));
      }
    }
    const EvalReport r = evaluate(truth, predicted, classes);
    for (std::size_t c = 0; c < K; ++c) {
      mean.per_class[c].precision += w * r.per_class[c].precision;
      mean.per_class[c].recall += w * r.per_class[c].recall;
      mean.per_class[c].f1 += w * r.per_class[c].f1;
      mean.per_class[c].support = r.per_class[c].support;
      for (std::size_t o = 0; o < K; ++o) mean.confusion[c][o] += w * r.confusion[c][o];
    }
    mean.macro_precision += w * r.macro_precision;
    mean.macro_recall += w * r.macro_recall;
    mean.macro_f1 += w * r.macro_f1;
    mean.accuracy += w * r.accuracy;
  }
  return mean;
}

json report_to_json(const EvalReport& r) {
  json per_class = json::object();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const auto& m = r.per_class[c];
    per_class[r.classes[c]] = {{"precision", m.precision},
                               {"recall", m.recall},
                               {"f1", m.f1},
                               {"support", m.support}};
  }
  return json{{"classes", r.classes},
              {"per_class", per_class},
              {"macro", {{"precision", r.macro_precision},
                         {"recall", r.macro_recall},
                         {"f1", r.macro_f1}}},
              {"accuracy", r.accuracy},
              {"confusion", r.confusion},
              {"n_eval", r.n_eval}};
}

}  // namespace valuelens::distill
