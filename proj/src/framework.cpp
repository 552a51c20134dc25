#include "valuelens/framework.hpp"

#include <map>
#include <set>

#include "valuelens/text.hpp"

namespace valuelens::framework {

namespace {

std::string_view polarity_name(Polarity p) {
  return p == Polarity::positive ? "positive" : "negative";
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

template <typename T>
T require(const json& j, const char* key, const std::string& where,
          std::vector<std::string>& problems) {
  const auto it = j.find(key);
  if (it == j.end()) {
    problems.push_back(where + ": missing \"" + key + "\"");
    return T{};
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    problems.push_back(where + ": \"" + key + "\" has the wrong type");
    return T{};
  }
}

}  // namespace

std::string_view role_name(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::vector<std::string> validation_errors(const FrameworkSpec& spec) {
  std::vector<std::string> problems;
  if (text::trim(spec.task_specification).empty()) {
    problems.push_back("task_specification is empty");
  }
  if (text::trim(spec.cot_trigger).empty()) problems.push_back("cot_trigger is empty");

  std::set<std::string> ids;
  for (const auto& h : spec.heuristics) {
    if (!ids.insert(h.id).second) problems.push_back("duplicate heuristic id " + h.id);
    const char prefix = h.id.empty() ? '\0' : h.id.front();
    if (prefix == 'P' && h.polarity != Polarity::positive) {
      problems.push_back("heuristic " + h.id + " must be positive");
    } else if (prefix == 'N' && h.polarity != Polarity::negative) {
      problems.push_back("heuristic " + h.id + " must be negative");
    } else if (prefix != 'P' && prefix != 'N') {
      problems.push_back("heuristic id \"" + h.id + "\" must start with P or N");
    }
  }

  std::map<Label, int> coverage;
  for (std::size_t i = 0; i < spec.exemplars.size(); ++i) {
    const auto& ex = spec.exemplars[i];
    const std::string where = "exemplar " + std::to_string(i + 1);
    ++coverage[ex.label];
    if (text::trim(ex.sentence).empty()) problems.push_back(where + ": sentence is empty");
    if (text::trim(ex.rationale).empty()) {
      problems.push_back(where + ": rationale is empty");
      continue;
    }
    if (!ends_with(ex.rationale, canonical_suffix(ex.label))) {
      std::string found = "no canonical suffix";
      for (Label other : kLabels) {
        if (other != ex.label && ends_with(ex.rationale, canonical_suffix(other))) {
          found = "suffix says \"" + std::string(label_display(other)) + "\"";
        }
      }
      problems.push_back(where + ": label " + std::string(label_code(ex.label)) +
                         " but rationale has " + found);
    }
  }
  for (Label l : kLabels) {
    if (coverage[l] == 0) {
      problems.push_back("no exemplar for label " + std::string(label_code(l)));
    }
  }
  return problems;
}

void validate(const FrameworkSpec& spec) {
  auto problems = validation_errors(spec);
  if (problems.empty()) return;
  std::string msg = "invalid framework:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ValidationError(msg, std::move(problems));
}

json to_json(const FrameworkSpec& spec) {
  json defs = json::array();
  for (const auto& d : spec.definitions) defs.push_back({{"name", d.name}, {"text", d.text}});
  json heuristics = json::array();
  for (const auto& h : spec.heuristics) {
    heuristics.push_back(
        {{"id", h.id}, {"polarity", std::string(polarity_name(h.polarity))}, {"text", h.text}});
  }
  json exemplars = json::array();
  for (const auto& e : spec.exemplars) {
    exemplars.push_back({{"sentence", e.sentence},
                         {"label", std::string(label_code(e.label))},
                         {"rationale", e.rationale}});
  }
  return json{{"task_specification", spec.task_specification},
              {"definitions", defs},
              {"behavior_corrections", spec.behavior_corrections},
              {"heuristics", heuristics},
              {"exemplars", exemplars},
              {"cot_trigger", spec.cot_trigger}};
}

FrameworkSpec from_json(const json& j) {
  std::vector<std::string> problems;
  FrameworkSpec spec;
  if (!j.is_object()) throw ValidationError("framework must be a JSON object");

  spec.task_specification = require<std::string>(j, "task_specification", "framework", problems);
  if (j.contains("cot_trigger")) {
    spec.cot_trigger = require<std::string>(j, "cot_trigger", "framework", problems);
  }
  if (j.contains("behavior_corrections")) {
    spec.behavior_corrections =
        require<std::vector<std::string>>(j, "behavior_corrections", "framework", problems);
  }
  for (const auto& d : j.value("definitions", json::array())) {
    const std::string where = "definition";
    spec.definitions.push_back({require<std::string>(d, "name", where, problems),
                                require<std::string>(d, "text", where, problems)});
  }
  for (const auto& h : j.value("heuristics", json::array())) {
    Heuristic out;
    out.id = require<std::string>(h, "id", "heuristic", problems);
    const auto pol = require<std::string>(h, "polarity", "heuristic " + out.id, problems);
    if (pol == "positive") {
      out.polarity = Polarity::positive;
    } else if (pol == "negative") {
      out.polarity = Polarity::negative;
    } else {
      problems.push_back("heuristic " + out.id + ": unknown polarity \"" + pol + "\"");
    }
    out.text = require<std::string>(h, "text", "heuristic " + out.id, problems);
    spec.heuristics.push_back(std::move(out));
  }
  std::size_t n = 0;
  for (const auto& e : j.value("exemplars", json::array())) {
    const std::string where = "exemplar " + std::to_string(++n);
    Exemplar out;
    out.sentence = require<std::string>(e, "sentence", where, problems);
    const auto label = require<std::string>(e, "label", where, problems);
    if (auto l = resolve_label(label)) {
      out.label = *l;
    } else {
      problems.push_back(where + ": unknown label \"" + label + "\"");
    }
    out.rationale = require<std::string>(e, "rationale", where, problems);
    spec.exemplars.push_back(std::move(out));
  }
  if (!problems.empty()) {
    std::string msg = "invalid framework:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg, std::move(problems));
  }
  return spec;
}

FrameworkSpec load_framework(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  // Schema problems and rule violations are reported together.
  std::vector<std::string> problems;
  FrameworkSpec spec;
  try {
    spec = from_json(j);
  } catch (const ValidationError& e) {
    problems = e.problems();
    if (problems.empty()) problems.push_back(e.what());
  }
  if (problems.empty()) problems = validation_errors(spec);
  if (!problems.empty()) {
    std::string msg = "invalid framework " + path.string() + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg, std::move(problems));
  }
  return spec;
}

FrameworkSpec default_framework() {
  static const FrameworkSpec kSpec = [] {
    FrameworkSpec spec = from_json(json::parse(default_framework_json()));
    validate(spec);
    return spec;
  }();
  return kSpec;
}

std::string system_message(const FrameworkSpec& spec) {
  std::string out = spec.task_specification;
  auto block = [&](std::string_view header, const std::vector<std::string>& items,
                   std::string_view sep) {
    if (items.empty()) return;
    out += "\n\n";
    out += header;
    out += '\n';
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i > 0) out += sep;
      out += items[i];
    }
  };
  std::vector<std::string> defs;
  for (const auto& d : spec.definitions) defs.push_back(d.name + ": " + d.text);
  std::vector<std::string> corrections;
  for (const auto& c : spec.behavior_corrections) corrections.push_back("- " + c);
  std::vector<std::string> heuristics;
  for (const auto& h : spec.heuristics) {
    heuristics.push_back(h.id + " (" + std::string(polarity_name(h.polarity)) + "): " + h.text);
  }
  block("DEFINITIONS", defs, "\n\n");
  block("BEHAVIOR CORRECTIONS", corrections, "\n");
  block("HEURISTICS", heuristics, "\n\n");
  return out;
}

std::string user_turn(std::string_view sentence) {
  std::string out = "Sentence: ";
  out += sentence;
  return out;
}

PromptMessages assemble_prompt(const FrameworkSpec& spec, std::string_view target_text) {
  PromptMessages messages;
  messages.reserve(2 + 2 * spec.exemplars.size());
  messages.push_back({Role::system, system_message(spec)});
  for (const auto& ex : spec.exemplars) {
    messages.push_back({Role::user, user_turn(ex.sentence)});
    messages.push_back({Role::assistant, spec.cot_trigger + " " + ex.rationale});
  }
  messages.push_back({Role::user, user_turn(target_text)});
  return messages;
}

json messages_to_json(const PromptMessages& messages) {
  json arr = json::array();
  for (const auto& m : messages) {
    arr.push_back({{"role", std::string(role_name(m.role))}, {"content", m.content}});
  }
  return arr;
}

PromptMessages messages_from_json(const json& j) {
  PromptMessages out;
  for (const auto& m : j) {
    const auto role = m.at("role").get<std::string>();
    Role r = Role::user;
    if (role == "system") {
      r = Role::system;
    } else if (role == "assistant") {
      r = Role::assistant;
    } else if (role != "user") {
      throw std::runtime_error("unknown message role " + role);
    }
    out.push_back({r, m.at("content").get<std::string>()});
  }
  return out;
}

std::string prompt_hash(std::string_view model, const PromptMessages& messages) {
  std::string payload(model);
  payload += '\n';
  payload += messages_to_json(messages).dump();
  return sha256_hex(payload);
}

}  // namespace valuelens::framework
