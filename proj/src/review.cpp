#include "valuelens/review.hpp"

#include <algorithm>
#include <mutex>

#include "valuelens/text.hpp"

namespace valuelens::review {

namespace {

std::size_t label_pos(Label l) {
  return static_cast<std::size_t>(std::find(kLabels.begin(), kLabels.end(), l) - kLabels.begin());
}

constexpr std::string_view kGlm = "GLM";

}  // namespace

AgreementStats agreement(const LabelMap& a, const LabelMap& b) {
  AgreementStats s;
  std::size_t matches = 0;
  for (const auto& [id, la] : a) {
    const auto it = b.find(id);
    if (it == b.end()) continue;
    ++s.n_compared;
    ++s.confusion[label_pos(la)][label_pos(it->second)];
    if (la == it->second) ++matches;
  }
  if (s.n_compared == 0) return s;
  const double n = static_cast<double>(s.n_compared);
  const double observed = static_cast<double>(matches) / n;
  s.percent_agreement = 100.0 * observed;
  double expected = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double row = 0.0;
    double col = 0.0;
    for (std::size_t o = 0; o < 3; ++o) {
      row += static_cast<double>(s.confusion[k][o]);
      col += static_cast<double>(s.confusion[o][k]);
    }
    expected += (row / n) * (col / n);
  }
  if (expected < 1.0) s.cohens_kappa = (observed - expected) / (1.0 - expected);
  return s;
}

ReviewStore::ReviewStore(std::vector<annotator::Annotation> annotations,
                         std::unordered_map<std::string, std::string> texts, fs::path journal)
    : texts_(std::move(texts)), journal_path_(std::move(journal)) {
  for (auto& a : annotations) {
    const std::string id = a.sent_id;
    annotations_.insert_or_assign(id, std::move(a));
  }
  if (fs::exists(journal_path_)) {
    for_each_jsonl(journal_path_, [&](std::size_t, const json& rec) { apply(rec); });
  } else if (journal_path_.has_parent_path()) {
    fs::create_directories(journal_path_.parent_path());
  }
  journal_.open(journal_path_, std::ios::binary | std::ios::app);
  if (!journal_) throw std::runtime_error("cannot open review journal " + journal_path_.string());
}

void ReviewStore::apply(const json& rec) {
  const std::string type = rec.value("type", "");
  if (type == "batch") {
    Batch b;
    b.batch_id = rec.at("batch_id").get<std::string>();
    b.seed = rec.at("seed").get<std::uint64_t>();
    b.requested = rec.at("n").get<std::size_t>();
    b.sent_ids = rec.at("sent_ids").get<std::vector<std::string>>();
    for (const auto& id : b.sent_ids) batch_of_.emplace(id, b.batch_id);
    batches_.push_back(std::move(b));
  } else if (type == "judgment") {
    Judgment j;
    j.annotator_id = rec.at("annotator_id").get<std::string>();
    j.sent_id = rec.at("sent_id").get<std::string>();
    const auto label = resolve_label(rec.at("label").get<std::string>());
    if (!label) throw std::runtime_error("journal holds an unknown label");
    j.label = *label;
    if (rec.contains("note") && rec["note"].is_string()) j.note = rec["note"].get<std::string>();
    j.ts = rec.value("ts", "");
    judgments_[j.annotator_id].emplace(j.sent_id, std::move(j));
  } else {
    throw std::runtime_error("unknown review journal record type '" + type + "'");
  }
}

void ReviewStore::append(const json& rec) {
  journal_ << rec.dump() << '\n';
  journal_.flush();
  if (!journal_) throw std::runtime_error("write to review journal failed");
}

std::string ReviewStore::enqueue_sample(std::size_t n, std::uint64_t seed) {
  std::unique_lock lock(mu_);
  const std::size_t available = annotations_.size();
  if (n > available) {
    throw ValidationError("batch size " + std::to_string(n) + " exceeds the " +
                          std::to_string(available) + " available annotations");
  }
  if (n == 0) throw ValidationError("batch size must be >= 1");
  std::vector<std::string> ids;
  ids.reserve(available);
  for (const auto& [id, a] : annotations_) ids.push_back(id);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(ids[i], ids[i + rng.below(available - i)]);
  }
  ids.resize(n);
  std::sort(ids.begin(), ids.end());
  const std::string batch_id = "batch-" + std::to_string(batches_.size() + 1);
  const json rec{{"type", "batch"}, {"batch_id", batch_id}, {"seed", seed},
                 {"n", n},          {"sent_ids", ids},     {"ts", clock_()}};
  append(rec);
  apply(rec);
  return batch_id;
}

std::optional<std::string> ReviewStore::find_batch(std::size_t n, std::uint64_t seed) const {
  std::shared_lock lock(mu_);
  for (const auto& b : batches_) {
    if (b.requested == n && b.seed == seed) return b.batch_id;
  }
  return std::nullopt;
}

std::vector<Batch> ReviewStore::batches() const {
  std::shared_lock lock(mu_);
  return batches_;
}

const Batch& ReviewStore::batch_locked(const std::string& batch_id) const {
  for (const auto& b : batches_) {
    if (b.batch_id == batch_id) return b;
  }
  throw UnknownBatchError(batch_id);
}

std::optional<ReviewItem> ReviewStore::item_locked(const std::string& sent_id) const {
  const auto batch = batch_of_.find(sent_id);
  const auto ann = annotations_.find(sent_id);
  if (batch == batch_of_.end() || ann == annotations_.end()) return std::nullopt;
  ReviewItem item;
  item.sent_id = sent_id;
  const auto text = texts_.find(sent_id);
  if (text != texts_.end()) item.text = text->second;
  item.glm_label = ann->second.label;
  item.glm_rationale = ann->second.rationale;
  item.batch_id = batch->second;
  return item;
}

std::optional<ReviewItem> ReviewStore::next_item(const std::string& annotator_id,
                                                 const std::string& batch_id) const {
  std::shared_lock lock(mu_);
  const Batch& b = batch_locked(batch_id);
  const auto judged = judgments_.find(annotator_id);
  for (const auto& id : b.sent_ids) {
    if (judged != judgments_.end() && judged->second.count(id)) continue;
    auto item = item_locked(id);
    if (item) item->batch_id = batch_id;
    return item;
  }
  return std::nullopt;
}

std::optional<ReviewItem> ReviewStore::item(const std::string& sent_id) const {
  std::shared_lock lock(mu_);
  return item_locked(sent_id);
}

SubmitResult ReviewStore::submit(const std::string& annotator_id, const std::string& sent_id,
                                 const std::string& label, std::optional<std::string> note) {
  if (text::trim(annotator_id).empty()) {
    return {SubmitStatus::bad_request, "annotator_id is required", std::nullopt};
  }
  const auto resolved = resolve_label(label);
  if (!resolved) return {SubmitStatus::bad_request, "unknown label '" + label + "'", std::nullopt};

  std::unique_lock lock(mu_);
  if (!batch_of_.count(sent_id) || !annotations_.count(sent_id)) {
    return {SubmitStatus::not_found, "no enqueued item " + sent_id, std::nullopt};
  }
  auto& mine = judgments_[annotator_id];
  if (const auto it = mine.find(sent_id); it != mine.end()) {
    return {SubmitStatus::conflict, "already judged by " + annotator_id, it->second};
  }
  Judgment j{annotator_id, sent_id, *resolved, std::move(note), clock_()};
  json rec = judgment_to_json(j);
  rec["type"] = "judgment";
  append(rec);
  mine.emplace(sent_id, j);
  return {SubmitStatus::accepted, "", j};
}

BatchStats ReviewStore::stats(const std::string& batch_id) const {
  std::shared_lock lock(mu_);
  const Batch& b = batch_locked(batch_id);
  BatchStats out;
  out.batch_id = batch_id;
  LabelMap glm;
  for (const auto& id : b.sent_ids) glm[id] = annotations_.at(id).label;
  std::map<std::string, LabelMap> by_annotator;
  for (const auto& [annotator, items] : judgments_) {
    LabelMap labels;
    for (const auto& id : b.sent_ids) {
      if (const auto it = items.find(id); it != items.end()) labels[id] = it->second.label;
    }
    if (!labels.empty()) by_annotator.emplace(annotator, std::move(labels));
  }
  for (const auto& [annotator, labels] : by_annotator) {
    out.vs_glm.push_back({annotator, std::string(kGlm), agreement(labels, glm)});
  }
  for (auto a = by_annotator.begin(); a != by_annotator.end(); ++a) {
    for (auto c = std::next(a); c != by_annotator.end(); ++c) {
      AgreementStats s = agreement(a->second, c->second);
      if (s.n_compared > 0) out.pairwise.push_back({a->first, c->first, s});
    }
  }
  return out;
}

Progress ReviewStore::progress(const std::string& batch_id) const {
  std::shared_lock lock(mu_);
  const Batch& b = batch_locked(batch_id);
  Progress p;
  p.total = b.sent_ids.size();
  for (const auto& [annotator, items] : judgments_) {
    std::size_t count = 0;
    for (const auto& id : b.sent_ids) count += items.count(id);
    if (count > 0) p.judged_by[annotator] = count;
  }
  return p;
}

std::vector<Judgment> ReviewStore::judgments() const {
  std::shared_lock lock(mu_);
  std::vector<Judgment> out;
  for (const auto& [annotator, items] : judgments_) {
    for (const auto& [id, j] : items) out.push_back(j);
  }
  return out;
}

json item_to_json(const ReviewItem& item) {
  return json{{"sent_id", item.sent_id},
              {"text", item.text},
              {"glm_label", std::string(label_code(item.glm_label))},
              {"glm_rationale", item.glm_rationale},
              {"batch_id", item.batch_id}};
}

json judgment_to_json(const Judgment& j) {
  json out{{"annotator_id", j.annotator_id},
           {"sent_id", j.sent_id},
           {"label", std::string(label_code(j.label))},
           {"ts", j.ts}};
  out["note"] = j.note ? json(*j.note) : json(nullptr);
  return out;
}

json agreement_to_json(const AgreementStats& s) {
  json labels = json::array();
  for (Label l : kLabels) labels.push_back(std::string(label_code(l)));
  return json{{"n_compared", s.n_compared},
              {"percent_agreement", s.percent_agreement ? json(*s.percent_agreement) : json()},
              {"cohens_kappa", s.cohens_kappa ? json(*s.cohens_kappa) : json()},
              {"labels", labels},
              {"confusion", s.confusion}};
}

json stats_to_json(const BatchStats& s) {
  auto pairs = [](const std::vector<PairStats>& list, const char* second_key) {
    json out = json::array();
    for (const auto& p : list) {
      json j = agreement_to_json(p.stats);
      j["annotator"] = p.first;
      j[second_key] = p.second;
      out.push_back(std::move(j));
    }
    return out;
  };
  return json{{"batch_id", s.batch_id},
              {"vs_glm", pairs(s.vs_glm, "reference")},
              {"pairwise", pairs(s.pairwise, "other_annotator")}};
}

json progress_to_json(const Progress& p) {
  return json{{"total", p.total}, {"judged_by", p.judged_by}};
}

}  // namespace valuelens::review
