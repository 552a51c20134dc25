#include "valuelens/corpus.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "valuelens/text.hpp"

namespace valuelens::corpus {

namespace {

bool is_terminator(char c) { return c == '.' || c == '?' || c == '!'; }

bool is_ascii_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_ascii_opener(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }

// Byte length of a curly quote at `i` ("’" / "”" as closers,
// "‘" / "“" as openers), or 0.
std::size_t curly_quote_len(std::string_view s, std::size_t i, bool closing) {
  if (i + 3 > s.size()) return 0;
  if (static_cast<unsigned char>(s[i]) != 0xE2 ||
      static_cast<unsigned char>(s[i + 1]) != 0x80) {
    return 0;
  }
  const auto third = static_cast<unsigned char>(s[i + 2]);
  if (closing) return (third == 0x99 || third == 0x9D) ? 3 : 0;
  return (third == 0x98 || third == 0x9C) ? 3 : 0;
}

bool starts_upper_or_digit(std::string_view s, std::size_t i) {
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  auto idx = static_cast<int32_t>(i);
  UChar32 c;
  U8_NEXT(p, idx, static_cast<int32_t>(s.size()), c);
  return c >= 0 && (u_isupper(c) || u_istitle(c) || u_isdigit(c));
}

// True when the period at `dot` ends an abbreviation or an initial.
bool is_abbreviation_at(std::string_view s, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !text::is_space(s[start - 1])) --start;
  std::string_view word = s.substr(start, dot - start + 1);
  while (!word.empty() && is_ascii_opener(word.front())) word.remove_prefix(1);
  if (word.size() == 2 && word[0] >= 'A' && word[0] <= 'Z') return true;
  const std::string lower = text::to_lower_ascii(word);
  const auto& abbrevs = abbreviations();
  return std::find(abbrevs.begin(), abbrevs.end(), lower) != abbrevs.end();
}

}  // namespace

std::string_view section_name(Section s) {
  switch (s) {
    case Section::abstract: return "abstract";
    case Section::background: return "background";
    case Section::summary: return "summary";
  }
  return "abstract";
}

std::optional<Section> parse_section(std::string_view name) {
  for (Section s : kSections) {
    if (section_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string make_sent_id(std::string_view doc_id, Section section, int ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", ordinal);
  std::string id(doc_id);
  id += ':';
  id += section_name(section);
  id += ':';
  id += buf;
  return id;
}

const std::vector<std::string>& abbreviations() {
  static const std::vector<std::string> kList = {
      "e.g.",  "i.e.",  "fig.", "figs.", "no.",   "nos.", "u.s.", "u.k.", "al.",
      "vs.",   "cf.",   "approx.", "ref.", "refs.", "eq.", "eqs.", "dr.",  "mr.",  "mrs.",
      "ms.",   "prof.", "inc.",  "corp.", "ltd.", "co.",   "jr.",  "sr.",  "st.",  "ser.",
      "pat.",  "pub.",  "appl.", "sec.", "vol.", "pp.",   "ca.",  "resp.", "viz."};
  return kList;
}

std::vector<std::string> segment_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    const std::string_view piece = text::trim(text.substr(b, e - b));
    if (!piece.empty()) out.emplace_back(piece);
  };

  std::size_t seg_start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    const std::size_t term = i;
    std::size_t j = i + 1;
    while (j < text.size() && is_terminator(text[j])) ++j;
    while (j < text.size()) {
      if (is_ascii_closer(text[j])) {
        ++j;
      } else if (const std::size_t q = curly_quote_len(text, j, true); q > 0) {
        j += q;
      } else {
        break;
      }
    }
    if (j >= text.size() || !text::is_space(text[j])) {
      i = j;
      continue;
    }
    std::size_t k = j;
    while (k < text.size() && text::is_space(text[k])) ++k;
    std::size_t first = k;
    while (first < text.size()) {
      if (is_ascii_opener(text[first])) {
        ++first;
      } else if (const std::size_t q = curly_quote_len(text, first, false); q > 0) {
        first += q;
      } else {
        break;
      }
    }
    const bool boundary = first < text.size() && starts_upper_or_digit(text, first) &&
                          !(text[term] == '.' && j == term + 1 && is_abbreviation_at(text, term));
    if (boundary) {
      emit(seg_start, j);
      seg_start = k;
    }
    i = k;
  }
  if (seg_start < text.size()) emit(seg_start, text.size());
  return out;
}

std::vector<Sentence> split_document(const Document& doc) {
  std::vector<Sentence> out;
  for (const auto& [section, raw] : doc.sections) {
    const std::string normalized = text::nfc(raw);
    int ordinal = 0;
    for (auto& piece : segment_sentences(normalized)) {
      Sentence s;
      s.sent_id = make_sent_id(doc.doc_id, section, ordinal);
      s.doc_id = doc.doc_id;
      s.section = section;
      s.ordinal = ordinal;
      s.text = std::move(piece);
      out.push_back(std::move(s));
      ++ordinal;
    }
  }
  return out;
}

json sentence_to_json(const Sentence& s) {
  return json{{"sent_id", s.sent_id},
              {"doc_id", s.doc_id},
              {"section", std::string(section_name(s.section))},
              {"ordinal", s.ordinal},
              {"text", s.text}};
}

Sentence sentence_from_json(const json& j) {
  Sentence s;
  s.sent_id = j.at("sent_id").get<std::string>();
  s.doc_id = j.at("doc_id").get<std::string>();
  const auto section = parse_section(j.at("section").get<std::string>());
  if (!section) throw std::runtime_error("unknown section in sentence " + s.sent_id);
  s.section = *section;
  s.ordinal = j.at("ordinal").get<int>();
  s.text = j.at("text").get<std::string>();
  return s;
}

IngestResult ingest_documents(const fs::path& input, const fs::path& store) {
  IngestResult result;
  std::set<std::string> seen;
  std::vector<Sentence> sentences;

  auto bad_line = [&](std::size_t line, std::string msg) {
    result.errors.push_back({line, std::move(msg)});
  };

  for_each_jsonl(
      input,
      [&](std::size_t line, const json& rec) {
        if (!rec.is_object()) return bad_line(line, "record is not an object");
        const auto id_it = rec.find("doc_id");
        if (id_it == rec.end() || !id_it->is_string() || id_it->get<std::string>().empty()) {
          return bad_line(line, "missing or empty doc_id");
        }
        Document doc;
        doc.doc_id = id_it->get<std::string>();
        for (Section s : kSections) {
          const auto it = rec.find(std::string(section_name(s)));
          if (it == rec.end() || it->is_null()) continue;
          if (!it->is_string()) {
            return bad_line(line, std::string(section_name(s)) + " is not a string");
          }
          if (!text::trim(it->get<std::string>()).empty()) {
            doc.sections.emplace(s, it->get<std::string>());
          }
        }
        if (doc.sections.empty()) return bad_line(line, "no non-empty section");
        if (!seen.insert(doc.doc_id).second) throw DuplicateDocumentError(doc.doc_id);
        for (auto& s : split_document(doc)) sentences.push_back(std::move(s));
        ++result.stats.n_documents;
      },
      [&](std::size_t line, const std::string& msg) { bad_line(line, "invalid JSON: " + msg); });

  std::sort(sentences.begin(), sentences.end(),
            [](const Sentence& a, const Sentence& b) { return a.sent_id < b.sent_id; });

  std::string out;
  for (const auto& s : sentences) {
    out += sentence_to_json(s).dump();
    out += '\n';
    ++result.stats.per_section[s.section];
  }
  result.stats.n_sentences = sentences.size();
  write_file_atomic(store, out);
  for (const auto& e : result.errors) {
    log_warn(input.string() + ":" + std::to_string(e.line) + ": " + e.message);
  }
  return result;
}

void for_each_sentence(const fs::path& store, const std::function<void(const Sentence&)>& fn) {
  if (!fs::exists(store)) throw std::runtime_error("sentence store not found: " + store.string());
  for_each_jsonl(store, [&](std::size_t, const json& j) { fn(sentence_from_json(j)); });
}

std::vector<Sentence> read_sentences(const fs::path& store) {
  std::vector<Sentence> out;
  for_each_sentence(store, [&](const Sentence& s) { out.push_back(s); });
  return out;
}

std::unordered_map<std::string, std::string> read_sentence_texts(const fs::path& store) {
  std::unordered_map<std::string, std::string> out;
  for_each_sentence(store, [&](const Sentence& s) { out.emplace(s.sent_id, s.text); });
  return out;
}

}  // namespace valuelens::corpus
