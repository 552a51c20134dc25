#include "valuelens/linear_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace valuelens::distill {

namespace {

constexpr int kModelFormatVersion = 1;

// Stable log-sum-exp softmax; returns the log partition.
double softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return mx + std::log(sum);
}

}  // namespace

void validate(const TrainConfig& cfg) {
  std::vector<std::string> problems;
  if (!(cfg.learning_rate > 0.0)) problems.push_back("learning_rate must be > 0");
  if (!(cfg.lr_decay >= 0.0)) problems.push_back("lr_decay must be >= 0");
  if (cfg.epochs < 0) problems.push_back("epochs must be >= 0");
  if (cfg.batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (!(cfg.l2 >= 0.0)) problems.push_back("l2 must be >= 0");
  if (cfg.learning_rate * cfg.l2 >= 1.0) problems.push_back("learning_rate * l2 must be < 1");
  if (cfg.hash_bits < 1 || cfg.hash_bits > 24) problems.push_back("hash_bits must be in [1, 24]");
  if (!problems.empty()) throw ValidationError("invalid training config", problems);
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate}, {"lr_decay", cfg.lr_decay},
              {"epochs", cfg.epochs},               {"batch_size", cfg.batch_size},
              {"l2", cfg.l2},                       {"seed", cfg.seed},
              {"hash_bits", cfg.hash_bits}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.lr_decay = j.value("lr_decay", cfg.lr_decay);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.l2 = j.value("l2", cfg.l2);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.hash_bits = j.value("hash_bits", cfg.hash_bits);
  return cfg;
}

LinearModel LinearModel::zeros(std::vector<std::string> classes, int hash_bits) {
  LinearModel m;
  m.hash_bits = hash_bits;
  m.config.hash_bits = hash_bits;
  m.weights.assign(classes.size(), std::vector<double>(std::size_t{1} << hash_bits, 0.0));
  m.bias.assign(classes.size(), 0.0);
  m.classes = std::move(classes);
  return m;
}

std::vector<double> LinearModel::logits(const FeatureVector& x) const {
  std::vector<double> z(bias);
  for (std::size_t c = 0; c < weights.size(); ++c) {
    for (const auto& [i, v] : x.entries) z[c] += weights[c][i] * v;
  }
  return z;
}

std::vector<double> LinearModel::scores(const FeatureVector& x) const {
  std::vector<double> z = logits(x);
  softmax_inplace(z);
  return z;
}

int LinearModel::predict(const FeatureVector& x) const {
  const std::vector<double> z = logits(x);
  // max_element returns the first maximum
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

int LinearModel::predict(std::string_view text) const {
  return predict(featurize(text, hash_bits));
}

double objective(const LinearModel& m, const std::vector<Example>& data, double l2) {
  double loss = 0.0;
  for (const auto& ex : data) {
    std::vector<double> z = m.logits(ex.x);
    const double zy = z[static_cast<std::size_t>(ex.y)];
    loss += softmax_inplace(z) - zy;
  }
  if (!data.empty()) loss /= static_cast<double>(data.size());
  double sq = 0.0;
  for (const auto& row : m.weights) {
    for (double w : row) sq += w * w;
  }
  return loss + 0.5 * l2 * sq;
}

Gradient gradient(const LinearModel& m, const std::vector<Example>& data, double l2) {
  Gradient g;
  g.weights.assign(m.weights.size(), std::vector<double>(m.weights.empty() ? 0 : m.weights[0].size()));
  g.bias.assign(m.bias.size(), 0.0);
  const double inv_n = data.empty() ? 0.0 : 1.0 / static_cast<double>(data.size());
  for (const auto& ex : data) {
    std::vector<double> p = m.scores(ex.x);
    p[static_cast<std::size_t>(ex.y)] -= 1.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      g.bias[c] += p[c] * inv_n;
      for (const auto& [i, v] : ex.x.entries) g.weights[c][i] += p[c] * v * inv_n;
    }
  }
  for (std::size_t c = 0; c < g.weights.size(); ++c) {
    for (std::size_t i = 0; i < g.weights[c].size(); ++i) g.weights[c][i] += l2 * m.weights[c][i];
  }
  return g;
}

TrainResult train_linear(const std::vector<Example>& train, std::vector<std::string> classes,
                         const TrainConfig& cfg) {
  validate(cfg);
  if (train.empty()) throw ValidationError("training split is empty");
  if (classes.size() < 2) throw ValidationError("need at least two classes");
  const std::size_t C = classes.size();
  for (const auto& ex : train) {
    if (ex.y < 0 || static_cast<std::size_t>(ex.y) >= C) {
      throw ValidationError("training label out of range");
    }
  }
  TrainResult result{LinearModel::zeros(std::move(classes), cfg.hash_bits), {}};
  LinearModel& m = result.model;
  m.config = cfg;

  // The effective weights are scale * raw. Weight decay shrinks `scale`
  // instead of touching every coordinate.
  double scale = 1.0;
  auto fold_scale = [&] {
    for (auto& row : m.weights) {
      for (double& w : row) w *= scale;
    }
    scale = 1.0;
  };

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<double>> residuals;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch);
    rng.shuffle(order);
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += B, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + B);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      residuals.clear();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = train[order[k]];
        std::vector<double> z(m.bias);
        for (std::size_t c = 0; c < C; ++c) {
          double dot = 0.0;
          for (const auto& [i, v] : ex.x.entries) dot += m.weights[c][i] * v;
          z[c] += scale * dot;
        }
        const double zy = z[static_cast<std::size_t>(ex.y)];
        batch_loss += softmax_inplace(z) - zy;
        z[static_cast<std::size_t>(ex.y)] -= 1.0;
        residuals.push_back(std::move(z));
      }
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                                 ", batch " + std::to_string(batch_no + 1));
      }
      scale *= 1.0 - lr * cfg.l2;
      const double step = lr * inv_b / scale;
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = train[order[k]];
        const auto& r = residuals[k - start];
        for (std::size_t c = 0; c < C; ++c) {
          m.bias[c] -= lr * inv_b * r[c];
          for (const auto& [i, v] : ex.x.entries) m.weights[c][i] -= step * r[c] * v;
        }
      }
      if (scale < 1e-6) fold_scale();
    }
    fold_scale();
    const double obj = objective(m, train, cfg.l2);
    if (!std::isfinite(obj)) {
      throw std::runtime_error("non-finite training loss after epoch " + std::to_string(epoch + 1));
    }
    result.epoch_objective.push_back(obj);
  }
  return result;
}

json model_to_json(const LinearModel& m) {
  json weights = json::array();
  for (const auto& row : m.weights) {
    json entries = json::array();
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] != 0.0) entries.push_back(json::array({i, row[i]}));
    }
    weights.push_back(std::move(entries));
  }
  const json config = train_config_to_json(m.config);
  return json{{"format", "valuelens-linear"},
              {"version", kModelFormatVersion},
              {"classes", m.classes},
              {"hash_bits", m.hash_bits},
              {"dimension", std::size_t{1} << m.hash_bits},
              {"bias", m.bias},
              {"weights", weights},
              {"config", config},
              {"config_hash", sha256_hex(config.dump())},
              {"provenance", m.provenance}};
}

LinearModel model_from_json(const json& j) {
  if (j.value("format", "") != "valuelens-linear") throw ValidationError("not a valuelens model file");
  if (j.value("version", 0) != kModelFormatVersion) {
    throw ValidationError("unsupported model format version");
  }
  LinearModel m = LinearModel::zeros(j.at("classes").get<std::vector<std::string>>(),
                                     j.at("hash_bits").get<int>());
  m.bias = j.at("bias").get<std::vector<double>>();
  const json& weights = j.at("weights");
  if (weights.size() != m.classes.size() || m.bias.size() != m.classes.size()) {
    throw ValidationError("model weights do not match class count");
  }
  const std::size_t dim = std::size_t{1} << m.hash_bits;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    for (const auto& e : weights[c]) {
      const auto i = e.at(0).get<std::size_t>();
      if (i >= dim) throw ValidationError("model weight index out of range");
      m.weights[c][i] = e.at(1).get<double>();
    }
  }
  m.config = train_config_from_json(j.at("config"));
  m.provenance = j.value("provenance", json::object());
  return m;
}

void save_model(const fs::path& path, const LinearModel& m) {
  write_file_atomic(path, model_to_json(m).dump() + "\n");
}

LinearModel load_model(const fs::path& path) {
  try {
    return model_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError("malformed model file " + path.string() + ": " + e.what());
  }
}

}  // namespace valuelens::distill
