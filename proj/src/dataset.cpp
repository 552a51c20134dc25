#include "valuelens/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace valuelens::distill {

std::string_view task_name(Task t) { return t == Task::three_class ? "3class" : "2class"; }

Task parse_task(std::string_view s) {
  if (s == "3class" || s == "three_class") return Task::three_class;
  if (s == "2class" || s == "two_class") return Task::two_class;
  throw ValidationError("unknown task '" + std::string(s) + "' (expected 3class or 2class)");
}

const std::vector<std::string>& task_classes(Task t) {
  static const std::vector<std::string> three = {"D_PVE", "C_PVE", "NO_PVE"};
  static const std::vector<std::string> two = {"PVE", "NO_PVE"};
  return t == Task::three_class ? three : two;
}

int class_index(Task t, Label l) {
  const int three = l == Label::d_pve ? 0 : l == Label::c_pve ? 1 : 2;
  return t == Task::three_class ? three : collapse_class(three);
}

int collapse_class(int three_class_index) { return three_class_index == 2 ? 1 : 0; }

std::vector<LabeledItem> LabeledDataset::subset(Split s) const {
  std::vector<LabeledItem> out;
  for (const auto& item : items) {
    if (split.at(item.sent_id) == s) out.push_back(item);
  }
  return out;
}

LabeledDataset build_dataset(const std::vector<annotator::Annotation>& annotations,
                             const std::unordered_map<std::string, std::string>& texts,
                             Task task, double split_ratio, std::uint64_t seed) {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw ValidationError("split_ratio must be in (0, 1)");
  }
  LabeledDataset ds;
  ds.task = task;
  ds.classes = task_classes(task);
  ds.split_ratio = split_ratio;
  ds.seed = seed;

  std::vector<std::string> missing;
  for (const auto& a : annotations) {
    const auto it = texts.find(a.sent_id);
    if (it == texts.end()) {
      missing.push_back(a.sent_id);
      continue;
    }
    ds.items.push_back({a.sent_id, it->second, class_index(task, a.label)});
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    if (missing.size() > 20) missing.resize(20);
    throw ValidationError("annotated sentences missing from the corpus", missing);
  }
  std::sort(ds.items.begin(), ds.items.end(),
            [](const LabeledItem& a, const LabeledItem& b) { return a.sent_id < b.sent_id; });
  for (std::size_t i = 1; i < ds.items.size(); ++i) {
    if (ds.items[i].sent_id == ds.items[i - 1].sent_id) {
      throw ValidationError("duplicate annotation for " + ds.items[i].sent_id);
    }
  }

  const std::size_t C = ds.classes.size();
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.items[i].label)].push_back(i);
  }
  std::vector<std::string> absent;
  for (std::size_t c = 0; c < C; ++c) {
    if (by_class[c].empty()) absent.push_back(ds.classes[c]);
  }
  if (!absent.empty()) throw ValidationError("label class absent from the data", absent);

  // Largest remainder: floor each class quota, then hand the leftover train
  // slots to the largest fractional parts (lowest class index on ties).
  const std::size_t n = ds.items.size();
  const auto target = static_cast<std::size_t>(std::llround(split_ratio * static_cast<double>(n)));
  std::vector<std::size_t> quota(C);
  std::vector<double> remainder(C);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double exact = split_ratio * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::vector<std::size_t> order(C);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < target && i < C; ++i) {
    if (quota[order[i]] < by_class[order[i]].size()) {
      ++quota[order[i]];
      ++assigned;
    }
  }

  Rng rng(seed);
  std::size_t n_train = 0;
  for (std::size_t c = 0; c < C; ++c) {
    rng.shuffle(by_class[c]);
    for (std::size_t j = 0; j < by_class[c].size(); ++j) {
      const bool train = j < quota[c];
      ds.split[ds.items[by_class[c][j]].sent_id] = train ? Split::train : Split::eval;
      n_train += train ? 1 : 0;
    }
  }
  if (n_train == 0) throw ValidationError("train split is empty");
  if (n_train == n) throw ValidationError("eval split is empty");
  return ds;
}

json split_to_json(const LabeledDataset& ds) {
  json train = json::array();
  json eval = json::array();
  for (const auto& item : ds.items) {
    (ds.split.at(item.sent_id) == Split::train ? train : eval).push_back(item.sent_id);
  }
  return json{{"task", std::string(task_name(ds.task))},
              {"classes", ds.classes},
              {"split_ratio", ds.split_ratio},
              {"seed", ds.seed},
              {"train", train},
              {"eval", eval}};
}

}  // namespace valuelens::distill
