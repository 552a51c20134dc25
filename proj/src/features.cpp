#include "valuelens/features.hpp"

#include <cmath>
#include <map>
#include <string>

#include "valuelens/common.hpp"
#include "valuelens/text.hpp"

namespace valuelens::distill {

double FeatureVector::norm() const {
  double sq = 0.0;
  for (const auto& [i, v] : entries) sq += v * v;
  return std::sqrt(sq);
}

std::uint32_t feature_index(std::string_view key, int bits) {
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  return static_cast<std::uint32_t>(fnv1a64(key) & mask);
}

FeatureVector featurize(std::string_view text, int bits) {
  if (bits < 1 || bits > 30) throw ValidationError("hash bits must be in [1, 30]");
  FeatureVector fv;
  fv.dimension = std::uint32_t{1} << bits;
  const text::TokenSeq tokens = text::tokenize(text);
  std::map<std::uint32_t, double> counts;
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    key = "u:" + tokens[i];
    counts[feature_index(key, bits)] += 1.0;
    if (i + 1 < tokens.size()) {
      key = "b:" + tokens[i] + " " + tokens[i + 1];
      counts[feature_index(key, bits)] += 1.0;
    }
  }
  double sq = 0.0;
  for (const auto& [i, c] : counts) sq += c * c;
  const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
  fv.entries.reserve(counts.size());
  for (const auto& [i, c] : counts) fv.entries.emplace_back(i, c * inv);
  return fv;
}

}  // namespace valuelens::distill
