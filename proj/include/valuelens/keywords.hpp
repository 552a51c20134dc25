#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "valuelens/common.hpp"
#include "valuelens/corpus.hpp"
#include "valuelens/text.hpp"

namespace valuelens::keywords {

inline constexpr int kMinTier = 1;
inline constexpr int kMaxTier = 4;
inline constexpr int kMaxTermTokens = 3;

struct Keyword {
  std::string term;  // lowercase, single-spaced
  int tier = 1;
  text::TokenSeq tokens;
};

// Validated lexicon with an index from first token to candidate keywords.
class KeywordSet {
 public:
  KeywordSet(std::vector<Keyword> keywords, std::string source_path, std::string content_hash);

  const std::vector<Keyword>& keywords() const { return keywords_; }
  const std::string& source_path() const { return source_path_; }
  const std::string& content_hash() const { return content_hash_; }

  // Indices of keywords whose first token is `token`.
  const std::vector<std::size_t>* candidates(const std::string& token) const;

 private:
  std::vector<Keyword> keywords_;
  std::string source_path_;
  std::string content_hash_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_first_token_;
};

struct MatchRecord {
  std::string sent_id;
  std::vector<std::string> terms;  // sorted, unique
  int tier = 1;                    // max tier over `terms`

  bool operator==(const MatchRecord&) const = default;
};

// Parses lexicon CSV text: header "term,tier", '#' comment lines, blank lines
// ignored. Throws ValidationError listing every bad row.
KeywordSet parse_keywords(std::string_view csv, std::string source_path = "<memory>");
KeywordSet load_keywords(const fs::path& path);

// A keyword matches when its token sequence occurs contiguously in the
// sentence's token sequence.
std::optional<MatchRecord> match_sentence(const corpus::Sentence& sentence, const KeywordSet& ks);
std::optional<MatchRecord> match_text(const std::string& sent_id, std::string_view text,
                                      const KeywordSet& ks);

std::vector<MatchRecord> filter_corpus(const fs::path& store, const KeywordSet& ks);

json match_to_json(const MatchRecord& m);
MatchRecord match_from_json(const json& j);
void write_matches(const fs::path& path, const std::vector<MatchRecord>& records);
std::vector<MatchRecord> read_matches(const fs::path& path);

enum class SampleMode {
  bernoulli,    // one uniform draw per record, kept when draw < rate
  exact_count,  // per tier, exactly round(rate * n) records without replacement
};

struct SamplePlan {
  std::array<double, 4> rates = {0.045, 0.14, 0.65, 1.0};  // tiers 1..4
  std::uint64_t seed = 0;
  SampleMode mode = SampleMode::bernoulli;

  double rate_for(int tier) const { return rates.at(static_cast<std::size_t>(tier - 1)); }
};

// Throws ValidationError if any rate is outside [0, 1] or not finite.
void validate(const SamplePlan& plan);

// Parses "0.045,0.14,0.65,1.0".
std::array<double, 4> parse_rates(std::string_view csv);

// Records are visited in sent_id order; the result is sorted by sent_id.
// Bernoulli mode draws exactly one uniform per record from Rng(seed), so a
// record's draw does not depend on any rate and raising a rate can only add
// records.
std::vector<std::string> sample_by_tier(std::vector<MatchRecord> records, const SamplePlan& plan);

void write_ids(const fs::path& path, const std::vector<std::string>& ids);
std::vector<std::string> read_ids(const fs::path& path);

}  // namespace valuelens::keywords
