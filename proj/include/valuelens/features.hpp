#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace valuelens::distill {

inline constexpr int kDefaultHashBits = 18;

struct FeatureVector {
  std::uint32_t dimension = 1u << kDefaultHashBits;
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by index, unique

  double norm() const;
};

// Index of a feature key: FNV-1a 64 of the key, masked to the low `bits` bits.
std::uint32_t feature_index(std::string_view key, int bits);

// Hashed bag of unigrams ("u:" + token) and adjacent bigrams
// ("b:" + t1 + " " + t2) from the shared tokenizer. Colliding keys add up.
// Counts are L2-normalized; empty text gives the zero vector.
FeatureVector featurize(std::string_view text, int bits = kDefaultHashBits);

}  // namespace valuelens::distill
