#include "valuelens/lda.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

namespace valuelens::rationale_eval {

void validate(const LdaConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.k < 2) problems.push_back("k must be >= 2");
  if (cfg.iterations < 1) problems.push_back("iterations must be >= 1");
  if (cfg.alpha && !(*cfg.alpha > 0.0)) problems.push_back("alpha must be > 0");
  if (!(cfg.beta > 0.0)) problems.push_back("beta must be > 0");
  if (cfg.min_document_frequency < 1) problems.push_back("min_document_frequency must be >= 1");
  if (!problems.empty()) throw ValidationError("invalid LDA config", problems);
}

const std::vector<std::string>& english_stopwords() {
  static const std::vector<std::string> words = {
      "a",       "about",   "above",   "after",  "again",   "against", "all",     "also",
      "am",      "an",      "and",     "any",    "are",     "as",      "at",      "be",
      "because", "been",    "before",  "being",  "below",   "between", "both",    "but",
      "by",      "can",     "could",   "did",    "do",      "does",    "doing",   "down",
      "during",  "each",    "either",  "etc",    "few",     "for",     "from",    "further",
      "had",     "has",     "have",    "having", "he",      "her",     "here",    "hers",
      "herself", "him",     "himself", "his",    "how",     "however", "i",       "if",
      "in",      "into",    "is",      "it",     "its",     "itself",  "just",    "may",
      "me",      "might",   "more",    "most",   "must",    "my",      "myself",  "no",
      "nor",     "not",     "now",     "of",     "off",     "on",      "once",    "only",
      "or",      "other",   "our",     "ours",   "ourselves", "out",   "over",    "own",
      "s",       "same",    "shall",   "she",    "should",  "so",      "some",    "such",
      "t",       "than",    "that",    "the",    "their",   "theirs",  "them",    "themselves",
      "then",    "there",   "therefore", "these", "they",   "this",    "those",   "through",
      "thus",    "to",      "too",     "under",  "until",   "up",      "upon",    "us",
      "very",    "via",     "was",     "we",     "were",    "what",    "when",    "where",
      "whether", "which",   "while",   "who",    "whom",    "why",     "will",    "with",
      "within",  "without", "would",   "you",    "your",    "yours",   "yourself", "yourselves",
  };
  return words;
}

LdaCorpus build_lda_corpus(const std::vector<text::TokenSeq>& docs, const LdaConfig& cfg) {
  validate(cfg);
  if (docs.empty()) throw ValidationError("LDA needs at least one document");
  std::unordered_set<std::string> stop;
  if (cfg.remove_stopwords) stop.insert(english_stopwords().begin(), english_stopwords().end());

  std::map<std::string, int> df;
  for (const auto& doc : docs) {
    std::set<std::string_view> seen;
    for (const auto& t : doc) {
      if (!stop.count(t) && seen.insert(t).second) ++df[t];
    }
  }
  LdaCorpus out;
  std::map<std::string_view, std::uint32_t> ids;
  for (const auto& [term, count] : df) {
    if (count >= cfg.min_document_frequency) out.vocabulary.push_back(term);
  }
  if (out.vocabulary.empty()) {
    throw ValidationError("LDA vocabulary is empty after stopword and document-frequency filtering");
  }
  for (std::size_t i = 0; i < out.vocabulary.size(); ++i) {
    ids.emplace(out.vocabulary[i], static_cast<std::uint32_t>(i));
  }
  out.docs.reserve(docs.size());
  for (const auto& doc : docs) {
    std::vector<std::uint32_t> words;
    for (const auto& t : doc) {
      const auto it = ids.find(t);
      if (it != ids.end()) words.push_back(it->second);
    }
    out.token_count += words.size();
    out.docs.push_back(std::move(words));
  }
  return out;
}

TopicModel lda_fit(const LdaCorpus& corpus, const LdaConfig& cfg) {
  validate(cfg);
  const auto K = static_cast<std::size_t>(cfg.k);
  const std::size_t V = corpus.vocabulary.size();
  const std::size_t D = corpus.docs.size();
  if (V == 0 || D == 0) throw ValidationError("LDA needs a non-empty vocabulary and corpus");
  const double alpha = cfg.effective_alpha();
  const double beta = cfg.beta;
  const double v_beta = static_cast<double>(V) * beta;

  Rng rng(cfg.seed);
  std::vector<std::vector<std::uint32_t>> z(D);
  std::vector<std::uint32_t> n_dk(D * K, 0);
  std::vector<std::uint32_t> n_kw(K * V, 0);
  std::vector<std::uint32_t> n_k(K, 0);
  for (std::size_t d = 0; d < D; ++d) {
    z[d].resize(corpus.docs[d].size());
    for (std::size_t i = 0; i < corpus.docs[d].size(); ++i) {
      const auto k = static_cast<std::uint32_t>(rng.below(K));
      const std::uint32_t w = corpus.docs[d][i];
      z[d][i] = k;
      ++n_dk[d * K + k];
      ++n_kw[k * V + w];
      ++n_k[k];
    }
  }

  std::vector<double> cumulative(K);
  for (int sweep = 0; sweep < cfg.iterations; ++sweep) {
    for (std::size_t d = 0; d < D; ++d) {
      const auto& words = corpus.docs[d];
      for (std::size_t i = 0; i < words.size(); ++i) {
        const std::uint32_t w = words[i];
        std::uint32_t k = z[d][i];
        --n_dk[d * K + k];
        --n_kw[k * V + w];
        --n_k[k];
        double total = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
          total += (n_dk[d * K + t] + alpha) * (n_kw[t * V + w] + beta) / (n_k[t] + v_beta);
          cumulative[t] = total;
        }
        const double u = rng.uniform() * total;
        k = static_cast<std::uint32_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        if (k >= K) k = static_cast<std::uint32_t>(K - 1);
        z[d][i] = k;
        ++n_dk[d * K + k];
        ++n_kw[k * V + w];
        ++n_k[k];
      }
    }
  }

  TopicModel m;
  m.k = cfg.k;
  m.vocabulary = corpus.vocabulary;
  m.alpha = alpha;
  m.beta = beta;
  m.seed = cfg.seed;
  m.iterations = cfg.iterations;
  m.topic_word.assign(K, std::vector<double>(V));
  m.topic_tokens.assign(n_k.begin(), n_k.end());
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < V; ++v) {
      m.topic_word[k][v] = (n_kw[k * V + v] + beta) / (n_k[k] + v_beta);
    }
  }
  const double k_alpha = static_cast<double>(K) * alpha;
  m.doc_topic.assign(D, std::vector<double>(K));
  for (std::size_t d = 0; d < D; ++d) {
    const double len = static_cast<double>(corpus.docs[d].size());
    m.doc_lengths.push_back(corpus.docs[d].size());
    for (std::size_t k = 0; k < K; ++k) {
      m.doc_topic[d][k] = (n_dk[d * K + k] + alpha) / (len + k_alpha);
    }
  }
  return m;
}

TopicModel lda_fit(const std::vector<text::TokenSeq>& docs, const LdaConfig& cfg) {
  return lda_fit(build_lda_corpus(docs, cfg), cfg);
}

double expected_token_mass(const TopicModel& model) {
  double mass = 0.0;
  for (std::size_t d = 0; d < model.doc_topic.size(); ++d) {
    for (double p : model.doc_topic[d]) mass += static_cast<double>(model.doc_lengths[d]) * p;
  }
  return mass;
}

std::vector<std::vector<std::string>> top_words(const TopicModel& model, std::size_t m) {
  const std::size_t V = model.vocabulary.size();
  if (m < 1 || m > V) throw ValidationError("top_words: m must be in [1, V]");
  std::vector<std::vector<std::string>> out;
  std::vector<std::size_t> order(V);
  for (const auto& row : model.topic_word) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // vocabulary is sorted, so the index tiebreak is lexicographic
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (row[a] != row[b]) return row[a] > row[b];
                        return a < b;
                      });
    std::vector<std::string> words;
    for (std::size_t i = 0; i < m; ++i) words.push_back(model.vocabulary[order[i]]);
    out.push_back(std::move(words));
  }
  return out;
}

json topic_report(const TopicModel& model, std::size_t m) {
  const auto words = top_words(model, std::min(m, model.vocabulary.size()));
  const double total = static_cast<double>(
      std::accumulate(model.topic_tokens.begin(), model.topic_tokens.end(), std::size_t{0}));
  json topics = json::array();
  for (std::size_t k = 0; k < words.size(); ++k) {
    topics.push_back({{"topic_id", k},
                      {"top_words", words[k]},
                      {"weight", total > 0 ? static_cast<double>(model.topic_tokens[k]) / total
                                           : 0.0}});
  }
  return json{{"k", model.k},
              {"alpha", model.alpha},
              {"beta", model.beta},
              {"seed", model.seed},
              {"iterations", model.iterations},
              {"vocabulary_size", model.vocabulary.size()},
              {"documents", model.doc_topic.size()},
              {"topics", topics}};
}

}  // namespace valuelens::rationale_eval
