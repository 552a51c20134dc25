#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "valuelens/common.hpp"
#include "valuelens/label.hpp"

namespace valuelens::framework {

enum class Polarity { positive, negative };

struct Definition {
  std::string name;
  std::string text;
  bool operator==(const Definition&) const = default;
};

struct Heuristic {
  std::string id;  // "P1", "N2", ...
  Polarity polarity = Polarity::positive;
  std::string text;
  bool operator==(const Heuristic&) const = default;
};

struct Exemplar {
  std::string sentence;
  Label label = Label::no_pve;
  std::string rationale;  // ends with canonical_suffix(label)
  bool operator==(const Exemplar&) const = default;
};

inline constexpr std::string_view kDefaultCotTrigger = "Let's think step by step.";

struct FrameworkSpec {
  std::string task_specification;
  std::vector<Definition> definitions;
  std::vector<std::string> behavior_corrections;
  std::vector<Heuristic> heuristics;
  std::vector<Exemplar> exemplars;
  std::string cot_trigger{kDefaultCotTrigger};

  bool operator==(const FrameworkSpec&) const = default;
};

enum class Role { system, user, assistant };
std::string_view role_name(Role r);

struct Message {
  Role role = Role::user;
  std::string content;
  bool operator==(const Message&) const = default;
};

using PromptMessages = std::vector<Message>;

// Returns every rule violation; empty means valid.
std::vector<std::string> validation_errors(const FrameworkSpec& spec);
// Throws ValidationError carrying all violations.
void validate(const FrameworkSpec& spec);

json to_json(const FrameworkSpec& spec);
// Parses without validating. Throws ValidationError on schema problems.
FrameworkSpec from_json(const json& j);
FrameworkSpec load_framework(const fs::path& path);

// Built-in framework shipped with the tool (14 exemplars).
FrameworkSpec default_framework();
// The JSON text default_framework() is parsed from.
std::string_view default_framework_json();

// Layout:
//   system:    task specification, then "DEFINITIONS", "BEHAVIOR CORRECTIONS"
//              and "HEURISTICS" blocks, each preceded by a blank line and its
//              header line; empty blocks are omitted
//   per exemplar: user "Sentence: <text>", assistant "<cot_trigger> <rationale>"
//   final user: "Sentence: <target>"
PromptMessages assemble_prompt(const FrameworkSpec& spec, std::string_view target_text);

std::string user_turn(std::string_view sentence);
std::string system_message(const FrameworkSpec& spec);

json messages_to_json(const PromptMessages& messages);
PromptMessages messages_from_json(const json& j);

// sha256(model + "\n" + compact JSON of the messages). Used both as the
// annotation cache key and as the recorded prompt hash.
std::string prompt_hash(std::string_view model, const PromptMessages& messages);

}  // namespace valuelens::framework
