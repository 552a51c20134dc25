#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "valuelens/common.hpp"

namespace valuelens::corpus {

enum class Section { abstract, background, summary };

inline constexpr std::array<Section, 3> kSections = {Section::abstract, Section::background,
                                                     Section::summary};

std::string_view section_name(Section s);
std::optional<Section> parse_section(std::string_view name);

struct Document {
  std::string doc_id;
  std::map<Section, std::string> sections;
};

struct Sentence {
  std::string sent_id;
  std::string doc_id;
  Section section = Section::abstract;
  int ordinal = 0;
  std::string text;

  bool operator==(const Sentence&) const = default;
};

// "<doc_id>:<section>:<ordinal, zero-padded to 5 digits>". Zero padding makes
// lexicographic sent_id order agree with ordinal order inside a section.
std::string make_sent_id(std::string_view doc_id, Section section, int ordinal);

struct CorpusStats {
  std::size_t n_documents = 0;
  std::size_t n_sentences = 0;
  std::map<Section, std::size_t> per_section;
};

struct LineError {
  std::size_t line = 0;
  std::string message;
};

struct IngestResult {
  CorpusStats stats;
  std::vector<LineError> errors;
};

class DuplicateDocumentError : public std::runtime_error {
 public:
  explicit DuplicateDocumentError(const std::string& doc_id)
      : std::runtime_error("duplicate doc_id: " + doc_id), doc_id_(doc_id) {}
  const std::string& doc_id() const { return doc_id_; }

 private:
  std::string doc_id_;
};

// Abbreviations after which a period never ends a sentence (compared
// case-insensitively against the whitespace-delimited word ending in '.').
const std::vector<std::string>& abbreviations();

// Splits text on '.', '?' or '!' (optionally followed by closing quotes or
// brackets) when the next non-space character is an uppercase letter or a
// digit, possibly behind an opening quote or bracket. No split happens after
// a listed abbreviation or a single-capital initial such as "J.". Segments are
// trimmed; empty segments are dropped.
std::vector<std::string> segment_sentences(std::string_view text);

// Splits one parsed document into sentences. Text is NFC-normalized first.
std::vector<Sentence> split_document(const Document& doc);

// Reads JSONL documents ({"doc_id", "background"?, "summary"?, "abstract"?}),
// segments them and writes the sentence store sorted by sent_id. Malformed
// lines are collected in the result; a duplicate doc_id throws.
IngestResult ingest_documents(const fs::path& input, const fs::path& store);

json sentence_to_json(const Sentence& s);
Sentence sentence_from_json(const json& j);

// Streams the sentence store in file order (sorted by sent_id when written by
// ingest_documents).
void for_each_sentence(const fs::path& store, const std::function<void(const Sentence&)>& fn);
std::vector<Sentence> read_sentences(const fs::path& store);
std::unordered_map<std::string, std::string> read_sentence_texts(const fs::path& store);

}  // namespace valuelens::corpus
