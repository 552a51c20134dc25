#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "valuelens/annotator.hpp"
#include "valuelens/label.hpp"

namespace valuelens::review {

struct ReviewItem {
  std::string sent_id;
  std::string text;
  Label glm_label = Label::no_pve;
  std::string glm_rationale;
  std::string batch_id;
};

struct Judgment {
  std::string annotator_id;
  std::string sent_id;
  Label label = Label::no_pve;
  std::optional<std::string> note;
  std::string ts;
};

using LabelMap = std::map<std::string, Label>;

// Rows index the first map's label, columns the second's, both in kLabels order.
using Confusion = std::array<std::array<std::size_t, 3>, 3>;

struct AgreementStats {
  std::size_t n_compared = 0;
  std::optional<double> percent_agreement;  // null when nothing was compared
  // Chance-corrected; null when undefined (nothing compared or expected
  // agreement of 1).
  std::optional<double> cohens_kappa;
  Confusion confusion{};
};

// Over the intersection of keys.
AgreementStats agreement(const LabelMap& a, const LabelMap& b);

struct Batch {
  std::string batch_id;
  std::uint64_t seed = 0;
  std::size_t requested = 0;
  std::vector<std::string> sent_ids;  // sorted
};

struct PairStats {
  std::string first;   // annotator id
  std::string second;  // annotator id or "GLM"
  AgreementStats stats;
};

struct BatchStats {
  std::string batch_id;
  std::vector<PairStats> vs_glm;
  std::vector<PairStats> pairwise;  // only pairs sharing at least one item
};

struct Progress {
  std::size_t total = 0;
  std::map<std::string, std::size_t> judged_by;
};

enum class SubmitStatus { accepted, conflict, not_found, bad_request };

struct SubmitResult {
  SubmitStatus status = SubmitStatus::accepted;
  std::string message;
  std::optional<Judgment> judgment;  // the stored one (the original on conflict)
};

class UnknownBatchError : public std::runtime_error {
 public:
  explicit UnknownBatchError(const std::string& id) : std::runtime_error("unknown batch: " + id) {}
};

// Review state backed by an append-only JSONL journal of batch and judgment
// records. Construction replays the journal. Writes are serialized and
// flushed before they become visible; reads take a shared lock.
class ReviewStore {
 public:
  using Clock = std::function<std::string()>;

  ReviewStore(std::vector<annotator::Annotation> annotations,
              std::unordered_map<std::string, std::string> texts, fs::path journal);

  void set_clock(Clock clock) { clock_ = std::move(clock); }

  // Seeded uniform sample of n annotated sentences without replacement.
  // Throws ValidationError naming the available count when n is too large.
  std::string enqueue_sample(std::size_t n, std::uint64_t seed);
  // An existing batch with the same size and seed, if any.
  std::optional<std::string> find_batch(std::size_t n, std::uint64_t seed) const;
  std::vector<Batch> batches() const;

  std::optional<ReviewItem> next_item(const std::string& annotator_id,
                                      const std::string& batch_id) const;
  std::optional<ReviewItem> item(const std::string& sent_id) const;

  // The label is resolved through the alias table.
  SubmitResult submit(const std::string& annotator_id, const std::string& sent_id,
                      const std::string& label, std::optional<std::string> note);

  BatchStats stats(const std::string& batch_id) const;
  Progress progress(const std::string& batch_id) const;
  std::vector<Judgment> judgments() const;

 private:
  void apply(const json& record);
  void append(const json& record);
  const Batch& batch_locked(const std::string& batch_id) const;
  std::optional<ReviewItem> item_locked(const std::string& sent_id) const;

  std::map<std::string, annotator::Annotation> annotations_;
  std::unordered_map<std::string, std::string> texts_;
  fs::path journal_path_;
  std::ofstream journal_;
  Clock clock_ = utc_timestamp;

  mutable std::shared_mutex mu_;
  std::vector<Batch> batches_;
  std::map<std::string, std::string> batch_of_;  // sent_id -> first batch id
  // annotator -> sent_id -> judgment
  std::map<std::string, std::map<std::string, Judgment>> judgments_;
};

json item_to_json(const ReviewItem& item);
json judgment_to_json(const Judgment& j);
json agreement_to_json(const AgreementStats& s);
json stats_to_json(const BatchStats& s);
json progress_to_json(const Progress& p);

}  // namespace valuelens::review
