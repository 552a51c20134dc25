#include "valuelens/keywords.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace valuelens::keywords {

KeywordSet::KeywordSet(std::vector<Keyword> keywords, std::string source_path,
                       std::string content_hash)
    : keywords_(std::move(keywords)),
      source_path_(std::move(source_path)),
      content_hash_(std::move(content_hash)) {
  if (keywords_.empty()) throw ValidationError("keyword set is empty");
  for (std::size_t i = 0; i < keywords_.size(); ++i) {
    by_first_token_[keywords_[i].tokens.front()].push_back(i);
  }
}

const std::vector<std::size_t>* KeywordSet::candidates(const std::string& token) const {
  const auto it = by_first_token_.find(token);
  return it == by_first_token_.end() ? nullptr : &it->second;
}

KeywordSet parse_keywords(std::string_view csv, std::string source_path) {
  std::vector<Keyword> keywords;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  bool header_seen = false;

  std::istringstream in{std::string(csv)};
  std::string raw;
  std::size_t row = 0;
  while (std::getline(in, raw)) {
    ++row;
    const std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "row " + std::to_string(row) + ": ";
    if (!header_seen) {
      header_seen = true;
      if (text::to_lower_ascii(text::collapse_whitespace(line)) != "term,tier") {
        problems.push_back(where + "expected header \"term,tier\"");
        break;
      }
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string_view::npos) {
      problems.push_back(where + "expected \"term,tier\"");
      continue;
    }
    const std::string term =
        text::to_lower_ascii(text::collapse_whitespace(line.substr(0, comma)));
    const std::string_view tier_str = text::trim(line.substr(comma + 1));
    int tier = 0;
    const auto [ptr, ec] = std::from_chars(tier_str.data(), tier_str.data() + tier_str.size(), tier);
    if (ec != std::errc() || ptr != tier_str.data() + tier_str.size() || tier < kMinTier ||
        tier > kMaxTier) {
      problems.push_back(where + "tier must be an integer in 1-4, got \"" +
                         std::string(tier_str) + "\"");
      continue;
    }
    const auto words = text::split_whitespace(term);
    if (words.empty() || words.size() > static_cast<std::size_t>(kMaxTermTokens)) {
      problems.push_back(where + "term \"" + term + "\" must have 1-3 tokens, has " +
                         std::to_string(words.size()));
      continue;
    }
    text::TokenSeq tokens = text::tokenize(term);
    if (tokens.empty()) {
      problems.push_back(where + "term \"" + term + "\" has no word characters");
      continue;
    }
    if (!seen.insert(term).second) {
      problems.push_back(where + "duplicate term \"" + term + "\"");
      continue;
    }
    keywords.push_back({term, tier, std::move(tokens)});
  }
  if (!header_seen) problems.push_back("missing header \"term,tier\"");
  if (problems.empty() && keywords.empty()) problems.push_back("no keywords defined");
  if (!problems.empty()) {
    std::string msg = "invalid keyword lexicon " + source_path;
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg, problems);
  }
  const std::string hash = sha256_hex(csv);
  return KeywordSet(std::move(keywords), std::move(source_path), hash);
}

KeywordSet load_keywords(const fs::path& path) {
  return parse_keywords(read_file(path), path.string());
}

std::optional<MatchRecord> match_text(const std::string& sent_id, std::string_view text_in,
                                      const KeywordSet& ks) {
  const text::TokenSeq tokens = text::tokenize(text_in);
  std::set<std::size_t> hits;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const auto* cands = ks.candidates(tokens[pos]);
    if (cands == nullptr) continue;
    for (std::size_t idx : *cands) {
      const auto& kw = ks.keywords()[idx].tokens;
      if (pos + kw.size() > tokens.size()) continue;
      if (std::equal(kw.begin(), kw.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos))) {
        hits.insert(idx);
      }
    }
  }
  if (hits.empty()) return std::nullopt;
  MatchRecord rec;
  rec.sent_id = sent_id;
  rec.tier = kMinTier;
  for (std::size_t idx : hits) {
    rec.terms.push_back(ks.keywords()[idx].term);
    rec.tier = std::max(rec.tier, ks.keywords()[idx].tier);
  }
  std::sort(rec.terms.begin(), rec.terms.end());
  return rec;
}

std::optional<MatchRecord> match_sentence(const corpus::Sentence& sentence, const KeywordSet& ks) {
  return match_text(sentence.sent_id, sentence.text, ks);
}

std::vector<MatchRecord> filter_corpus(const fs::path& store, const KeywordSet& ks) {
  std::vector<MatchRecord> out;
  corpus::for_each_sentence(store, [&](const corpus::Sentence& s) {
    if (auto m = match_sentence(s, ks)) out.push_back(std::move(*m));
  });
  std::sort(out.begin(), out.end(),
            [](const MatchRecord& a, const MatchRecord& b) { return a.sent_id < b.sent_id; });
  return out;
}

json match_to_json(const MatchRecord& m) {
  return json{{"sent_id", m.sent_id}, {"tier", m.tier}, {"terms", m.terms}};
}

MatchRecord match_from_json(const json& j) {
  MatchRecord m;
  m.sent_id = j.at("sent_id").get<std::string>();
  m.tier = j.at("tier").get<int>();
  m.terms = j.at("terms").get<std::vector<std::string>>();
  return m;
}

void write_matches(const fs::path& path, const std::vector<MatchRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += match_to_json(r).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<MatchRecord> read_matches(const fs::path& path) {
  std::vector<MatchRecord> out;
  for_each_jsonl(path, [&](std::size_t, const json& j) { out.push_back(match_from_json(j)); });
  return out;
}

void validate(const SamplePlan& plan) {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < plan.rates.size(); ++i) {
    const double r = plan.rates[i];
    if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
      problems.push_back("rate for tier " + std::to_string(i + 1) + " must be in [0,1]");
    }
  }
  if (!problems.empty()) throw ValidationError("invalid sample plan", problems);
}

std::array<double, 4> parse_rates(std::string_view csv) {
  std::array<double, 4> rates{};
  std::size_t n = 0;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = std::min(csv.find(',', start), csv.size());
    const std::string field(text::trim(csv.substr(start, comma - start)));
    if (n >= rates.size()) throw ValidationError("expected exactly 4 rates");
    try {
      std::size_t used = 0;
      rates[n] = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ValidationError("invalid rate \"" + field + "\"");
    }
    ++n;
    start = comma + 1;
  }
  if (n != rates.size()) throw ValidationError("expected exactly 4 rates, got " + std::to_string(n));
  return rates;
}

std::vector<std::string> sample_by_tier(std::vector<MatchRecord> records, const SamplePlan& plan) {
  validate(plan);
  std::sort(records.begin(), records.end(),
            [](const MatchRecord& a, const MatchRecord& b) { return a.sent_id < b.sent_id; });
  std::vector<std::string> selected;
  Rng rng(plan.seed);

  if (plan.mode == SampleMode::bernoulli) {
    for (const auto& r : records) {
      const double draw = rng.uniform();
      if (draw < plan.rate_for(r.tier)) selected.push_back(r.sent_id);
    }
  } else {
    for (int tier = kMinTier; tier <= kMaxTier; ++tier) {
      std::vector<std::string> pool;
      for (const auto& r : records) {
        if (r.tier == tier) pool.push_back(r.sent_id);
      }
      const auto take = static_cast<std::size_t>(
          std::llround(plan.rate_for(tier) * static_cast<double>(pool.size())));
      // Partial Fisher-Yates: the first `take` slots become the sample.
      for (std::size_t i = 0; i < take; ++i) {
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      }
      selected.insert(selected.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

void write_ids(const fs::path& path, const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    out += id;
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<std::string> read_ids(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (!t.empty()) ids.emplace_back(t);
  }
  return ids;
}

}  // namespace valuelens::keywords
