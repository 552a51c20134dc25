#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "valuelens/annotator.hpp"
#include "valuelens/dataset.hpp"
#include "valuelens/keywords.hpp"
#include "valuelens/lda.hpp"
#include "valuelens/linear_model.hpp"

namespace valuelens::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

// Canonical order.
const std::vector<std::string>& stage_names();

struct Seeds {
  std::uint64_t sample = 0;
  std::uint64_t split = 0;
  std::uint64_t train = 0;
  std::uint64_t topics = 0;
  std::uint64_t baseline = 0;
};

struct TopicsConfig {
  Label label = Label::d_pve;
  int k = 10;
  int iterations = 1000;
  std::size_t top_words = 10;
};

struct RunConfig {
  fs::path corpus;
  fs::path keywords;
  std::optional<fs::path> framework;  // unset: built-in default framework
  fs::path workdir;
  keywords::SamplePlan sample;
  std::optional<fs::path> mock_fixture;  // set: offline mock GLM
  annotator::GlmConfig glm;
  annotator::Prices prices;
  distill::Task task = distill::Task::three_class;
  double split_ratio = 0.9;
  Seeds seeds;
  distill::TrainConfig train;
  TopicsConfig topics;
  int baseline_trials = 1000;
};

// Schema and referential checks; every problem is collected. Relative paths
// are resolved against `base_dir`. Never touches the network.
std::vector<std::string> config_errors(const json& j, const fs::path& base_dir);

// Throws ValidationError carrying config_errors() when any exist.
RunConfig parse_config(const json& j, const fs::path& base_dir);
RunConfig load_config(const fs::path& path);

framework::FrameworkSpec load_framework_or_default(const std::optional<fs::path>& path);

struct StageSummary {
  std::string stage;
  bool skipped = false;
  json details = json::object();
};

struct RunOptions {
  // Replaces the client built from the config (tests, dry runs).
  annotator::GlmClient* client = nullptr;
  bool force = false;  // ignore matching manifests
  // Timestamp source for new annotations; unset means wall-clock UTC.
  std::function<std::string()> clock;
};

// Runs the requested stages in canonical order. A stage whose manifest
// matches its current inputs, parameters and outputs is skipped. A missing
// upstream artifact raises ValidationError naming the stage to run first.
std::vector<StageSummary> run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages,
                                       const RunOptions& options = {});

json summary_to_json(const std::vector<StageSummary>& summaries);

}  // namespace valuelens::pipeline
