#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "valuelens/common.hpp"
#include "valuelens/features.hpp"

namespace valuelens::distill {

struct TrainConfig {
  double learning_rate = 0.5;
  double lr_decay = 0.1;  // step size at epoch e is learning_rate / (1 + lr_decay * e)
  int epochs = 10;
  int batch_size = 32;
  double l2 = 1e-6;
  std::uint64_t seed = 0;
  int hash_bits = kDefaultHashBits;
};

void validate(const TrainConfig& cfg);
json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);

struct Example {
  FeatureVector x;
  int y = 0;
};

// Multinomial logistic regression over hashed features. Weights are dense
// (classes x 2^hash_bits); the bias is not penalized.
struct LinearModel {
  std::vector<std::string> classes;
  int hash_bits = kDefaultHashBits;
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
  TrainConfig config;
  json provenance = json::object();  // task, split parameters, input hashes

  static LinearModel zeros(std::vector<std::string> classes, int hash_bits);

  std::vector<double> logits(const FeatureVector& x) const;
  // Softmax of the logits.
  std::vector<double> scores(const FeatureVector& x) const;
  // Argmax of the logits; ties go to the lowest class index.
  int predict(const FeatureVector& x) const;
  int predict(std::string_view text) const;
};

// Mean cross-entropy plus (l2 / 2) * ||W||^2.
double objective(const LinearModel& m, const std::vector<Example>& data, double l2);

struct Gradient {
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
};

// Exact gradient of `objective`.
Gradient gradient(const LinearModel& m, const std::vector<Example>& data, double l2);

struct TrainResult {
  LinearModel model;
  std::vector<double> epoch_objective;  // full training objective after each epoch
};

// Mini-batch SGD with seeded shuffling. Throws std::runtime_error naming the
// epoch and batch if a batch loss becomes non-finite.
TrainResult train_linear(const std::vector<Example>& train, std::vector<std::string> classes,
                         const TrainConfig& cfg);

json model_to_json(const LinearModel& m);
LinearModel model_from_json(const json& j);
void save_model(const fs::path& path, const LinearModel& m);
LinearModel load_model(const fs::path& path);

}  // namespace valuelens::distill
