#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "valuelens/annotator.hpp"
#include "valuelens/label.hpp"

namespace valuelens::distill {

enum class Task { three_class, two_class };

// "3class" / "2class"; parse_task also accepts "three_class" / "two_class".
std::string_view task_name(Task t);
Task parse_task(std::string_view s);

// Class order is fixed: {D_PVE, C_PVE, NO_PVE} or {PVE, NO_PVE}.
const std::vector<std::string>& task_classes(Task t);
int class_index(Task t, Label l);

// Maps a three-class index onto the two-class order.
int collapse_class(int three_class_index);

enum class Split { train, eval };

struct LabeledItem {
  std::string sent_id;
  std::string text;
  int label = 0;  // index into classes
};

struct LabeledDataset {
  Task task = Task::three_class;
  std::vector<std::string> classes;
  std::vector<LabeledItem> items;  // sorted by sent_id
  std::map<std::string, Split> split;
  double split_ratio = 0.9;
  std::uint64_t seed = 0;

  std::vector<LabeledItem> subset(Split s) const;
};

// Stratified by class: within each class the items are shuffled with the
// seeded generator and the first share goes to train. Per-class train counts
// use largest-remainder rounding so the overall train count is
// round(ratio * n). Throws ValidationError when a class is absent, when a
// sent_id has no text, or when either split would be empty.
LabeledDataset build_dataset(const std::vector<annotator::Annotation>& annotations,
                             const std::unordered_map<std::string, std::string>& texts,
                             Task task, double split_ratio, std::uint64_t seed);

json split_to_json(const LabeledDataset& ds);

}  // namespace valuelens::distill
