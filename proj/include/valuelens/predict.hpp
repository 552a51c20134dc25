#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "valuelens/dataset.hpp"
#include "valuelens/linear_model.hpp"
#include "valuelens/metrics.hpp"

namespace valuelens::distill {

// Evaluates the model on the dataset's eval split.
EvalReport evaluate_model(const LinearModel& model, const LabeledDataset& ds);

// Thrown when writing predictions fails. `durable_offset` records are known
// to be complete on disk; pass it back as `resume_from` to continue.
class PredictError : public std::runtime_error {
 public:
  PredictError(const std::string& what, std::size_t durable_offset)
      : std::runtime_error(what + " (resume from offset " + std::to_string(durable_offset) + ")"),
        durable_offset_(durable_offset) {}
  std::size_t durable_offset() const { return durable_offset_; }

 private:
  std::size_t durable_offset_;
};

// Streams the sentence store and writes one {"sent_id", "label", "scores"}
// line per sentence, in store order. With resume_from > 0 the first
// resume_from sentences are skipped and the output is truncated to its first
// resume_from lines before appending. Returns the total record count.
std::size_t predict_batch(const LinearModel& model, const fs::path& store, const fs::path& out,
                          std::size_t resume_from = 0, std::size_t flush_every = 1000);

// Reads {"sent_id", "label"} JSONL from an external backend and evaluates it
// on the eval split. Labels may be class names of the task or any accepted
// label spelling. Missing eval ids raise ValidationError listing up to 20.
EvalReport import_external_predictions(const fs::path& path, const LabeledDataset& ds);

}  // namespace valuelens::distill
