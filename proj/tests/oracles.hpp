#pragma once

// Independent reference implementations. They share no code with the library
// beyond plain containers: n-grams are compared element by element, sums run
// in input order, and nothing is hashed or cached.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline std::vector<Tokens> ngrams(const Tokens& t, std::size_t n) {
  std::vector<Tokens> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + i, t.begin() + i + n);
  return out;
}

inline std::size_t occurrences(const std::vector<Tokens>& grams, const Tokens& g) {
  return static_cast<std::size_t>(std::count(grams.begin(), grams.end(), g));
}

// Clipped matches of order n, by brute-force enumeration.
inline std::pair<double, double> precision(const Tokens& cand, const Tokens& ref, std::size_t n) {
  const auto cg = ngrams(cand, n);
  const auto rg = ngrams(ref, n);
  std::vector<Tokens> distinct;
  for (const auto& g : cg) {
    if (std::find(distinct.begin(), distinct.end(), g) == distinct.end()) distinct.push_back(g);
  }
  double matched = 0.0;
  for (const auto& g : distinct) {
    matched += static_cast<double>(std::min(occurrences(cg, g), occurrences(rg, g)));
  }
  return {matched, static_cast<double>(cg.size())};
}

// Geometric mean with uniform weights, computed as a product of powers.
inline double bleu(const Tokens& cand, const Tokens& ref, std::size_t max_n) {
  if (cand.empty() || ref.empty()) return 0.0;
  double product = 1.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto [m, total] = precision(cand, ref, n);
    if (total == 0.0 || m == 0.0) return 0.0;
    product *= std::pow(m / total, 1.0 / static_cast<double>(max_n));
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  return (c >= r ? 1.0 : std::exp(1.0 - r / c)) * product;
}

inline double mean_pairwise(const std::vector<Tokens>& items, std::size_t max_n) {
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (i == j) continue;
      sum += bleu(items[i], items[j], max_n);
      count += 1.0;
    }
  }
  return sum / count;
}

inline double mean_max(const std::vector<Tokens>& generated, const std::vector<Tokens>& provided,
                       std::size_t max_n) {
  double sum = 0.0;
  for (const auto& g : generated) {
    double best = 0.0;
    for (const auto& p : provided) best = std::max(best, bleu(g, p, max_n));
    sum += best;
  }
  return sum / static_cast<double>(generated.size());
}

// Splits on single spaces; fixtures are pre-tokenized lowercase text.
inline Tokens words(const std::string& s) {
  Tokens out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Per-class precision/recall/F1 straight from the definitions.
struct Prf {
  double p, r, f1;
};

inline std::vector<Prf> prf(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
  std::vector<Prf> out;
  for (int c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) tp += 1;
      if (pred[i] == c && truth[i] != c) fp += 1;
      if (pred[i] != c && truth[i] == c) fn += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    out.push_back({p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0});
  }
  return out;
}

}  // namespace oracle
