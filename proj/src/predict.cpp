#include "valuelens/predict.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "valuelens/corpus.hpp"
#include "valuelens/text.hpp"

namespace valuelens::distill {

namespace {

std::optional<int> resolve_class(const LabeledDataset& ds, std::string_view name) {
  for (std::size_t c = 0; c < ds.classes.size(); ++c) {
    if (ds.classes[c] == name) return static_cast<int>(c);
  }
  if (auto l = resolve_label(name)) return class_index(ds.task, *l);
  if (ds.task == Task::two_class) {
    const std::string lower = text::to_lower_ascii(text::trim(name));
    if (lower == "pve") return 0;
  }
  return std::nullopt;
}

// Keeps the first `lines` newline-terminated lines of `path`.
void truncate_lines(const fs::path& path, std::size_t lines) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PredictError("cannot reopen " + path.string() + " for resume", 0);
  std::size_t seen = 0;
  std::uintmax_t bytes = 0;
  char ch;
  while (seen < lines && in.get(ch)) {
    ++bytes;
    if (ch == '\n') ++seen;
  }
  if (seen < lines) {
    throw PredictError(path.string() + " holds fewer records than the resume offset", seen);
  }
  in.close();
  fs::resize_file(path, bytes);
}

}  // namespace

EvalReport evaluate_model(const LinearModel& model, const LabeledDataset& ds) {
  std::vector<int> truth;
  std::vector<int> predicted;
  for (const auto& item : ds.subset(Split::eval)) {
    truth.push_back(item.label);
    predicted.push_back(model.predict(std::string_view(item.text)));
  }
  return evaluate(truth, predicted, ds.classes);
}

std::size_t predict_batch(const LinearModel& model, const fs::path& store, const fs::path& out,
                          std::size_t resume_from, std::size_t flush_every) {
  if (resume_from > 0) truncate_lines(out, resume_from);
  std::ofstream os(out, resume_from > 0 ? std::ios::binary | std::ios::app
                                        : std::ios::binary | std::ios::trunc);
  if (!os) throw PredictError("cannot open " + out.string(), resume_from);
  std::size_t index = 0;
  std::size_t durable = resume_from;
  std::size_t written = resume_from;
  corpus::for_each_sentence(store, [&](const corpus::Sentence& s) {
    if (index++ < resume_from) return;
    const std::vector<double> scores = model.scores(featurize(s.text, model.hash_bits));
    const auto best = static_cast<std::size_t>(
        std::max_element(scores.begin(), scores.end()) - scores.begin());
    json rec{{"sent_id", s.sent_id}, {"label", model.classes[best]}, {"scores", json::object()}};
    for (std::size_t c = 0; c < scores.size(); ++c) rec["scores"][model.classes[c]] = scores[c];
    os << rec.dump() << '\n';
    ++written;
    if (flush_every > 0 && written % flush_every == 0) {
      os.flush();
      if (!os) throw PredictError("write to " + out.string() + " failed", durable);
      durable = written;
    }
  });
  os.flush();
  if (!os) throw PredictError("write to " + out.string() + " failed", durable);
  return written;
}

EvalReport import_external_predictions(const fs::path& path, const LabeledDataset& ds) {
  std::unordered_map<std::string, int> predictions;
  std::vector<std::string> problems;
  for_each_jsonl(path, [&](std::size_t line, const json& j) {
    if (!j.is_object() || !j.contains("sent_id") || !j.contains("label") ||
        !j["sent_id"].is_string() || !j["label"].is_string()) {
      problems.push_back("line " + std::to_string(line) + ": expected {sent_id, label}");
      return;
    }
    const auto cls = resolve_class(ds, j["label"].get<std::string>());
    if (!cls) {
      problems.push_back("line " + std::to_string(line) + ": unknown label '" +
                         j["label"].get<std::string>() + "'");
      return;
    }
    predictions[j["sent_id"].get<std::string>()] = *cls;
  });
  if (!problems.empty()) throw ValidationError("malformed external predictions", problems);

  std::vector<int> truth;
  std::vector<int> predicted;
  std::vector<std::string> missing;
  std::size_t n_missing = 0;
  for (const auto& item : ds.subset(Split::eval)) {
    const auto it = predictions.find(item.sent_id);
    if (it == predictions.end()) {
      if (missing.size() < 20) missing.push_back(item.sent_id);
      ++n_missing;
      continue;
    }
    truth.push_back(item.label);
    predicted.push_back(it->second);
  }
  if (n_missing > 0) {
    throw ValidationError(std::to_string(n_missing) + " eval sentence(s) missing from " +
                              path.string(),
                          missing);
  }
  return evaluate(truth, predicted, ds.classes);
}

}  // namespace valuelens::distill
