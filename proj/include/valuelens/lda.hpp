#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "valuelens/common.hpp"
#include "valuelens/text.hpp"

namespace valuelens::rationale_eval {

struct LdaConfig {
  int k = 10;
  int iterations = 1000;
  std::optional<double> alpha;  // unset means 50 / k
  double beta = 0.01;
  std::uint64_t seed = 0;
  bool remove_stopwords = true;
  int min_document_frequency = 2;

  double effective_alpha() const { return alpha ? *alpha : 50.0 / static_cast<double>(k); }
};

void validate(const LdaConfig& cfg);

const std::vector<std::string>& english_stopwords();

struct LdaCorpus {
  std::vector<std::string> vocabulary;           // sorted
  std::vector<std::vector<std::uint32_t>> docs;  // word ids; may be empty
  std::size_t token_count = 0;
};

// Stopword removal and the document-frequency floor. Throws ValidationError
// when nothing survives.
LdaCorpus build_lda_corpus(const std::vector<text::TokenSeq>& docs, const LdaConfig& cfg);

struct TopicModel {
  int k = 0;
  std::vector<std::string> vocabulary;
  std::vector<std::vector<double>> topic_word;  // k x V
  std::vector<std::vector<double>> doc_topic;   // D x k
  std::vector<std::size_t> topic_tokens;        // final assignment counts, size k
  std::vector<std::size_t> doc_lengths;         // after filtering
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  int iterations = 0;
};

// Collapsed Gibbs sampling, single-threaded. Same corpus, config and seed give
// bit-identical matrices.
TopicModel lda_fit(const LdaCorpus& corpus, const LdaConfig& cfg);
TopicModel lda_fit(const std::vector<text::TokenSeq>& docs, const LdaConfig& cfg);

// Sum over documents and topics of doc_length * doc_topic; equals the token
// count up to rounding.
double expected_token_mass(const TopicModel& model);

// Probability descending, ties lexicographic. Requires 1 <= m <= V.
std::vector<std::vector<std::string>> top_words(const TopicModel& model, std::size_t m);

// [{topic_id, top_words, weight}] where weight is the topic's token share.
json topic_report(const TopicModel& model, std::size_t m);

}  // namespace valuelens::rationale_eval
