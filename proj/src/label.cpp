#include "valuelens/label.hpp"

#include "valuelens/text.hpp"

namespace valuelens {

std::string_view label_code(Label l) {
  switch (l) {
    case Label::d_pve: return "D_PVE";
    case Label::c_pve: return "C_PVE";
    case Label::no_pve: return "NO_PVE";
  }
  return "NO_PVE";
}

std::string_view label_display(Label l) {
  switch (l) {
    case Label::d_pve: return "Direct PVE";
    case Label::c_pve: return "Contextual PVE";
    case Label::no_pve: return "No PVE";
  }
  return "No PVE";
}

const std::vector<std::pair<std::string, Label>>& label_aliases() {
  static const std::vector<std::pair<std::string, Label>> kAliases = {
      {"direct pve", Label::d_pve},
      {"direct-pve", Label::d_pve},
      {"direct_pve", Label::d_pve},
      {"d pve", Label::d_pve},
      {"d-pve", Label::d_pve},
      {"d_pve", Label::d_pve},
      {"dpve", Label::d_pve},
      {"direct public value expression", Label::d_pve},
      {"contextual pve", Label::c_pve},
      {"contextual-pve", Label::c_pve},
      {"contextual_pve", Label::c_pve},
      {"c pve", Label::c_pve},
      {"c-pve", Label::c_pve},
      {"c_pve", Label::c_pve},
      {"cpve", Label::c_pve},
      {"contextual public value expression", Label::c_pve},
      {"no pve", Label::no_pve},
      {"no-pve", Label::no_pve},
      {"no_pve", Label::no_pve},
      {"nopve", Label::no_pve},
      {"non-pve", Label::no_pve},
      {"non pve", Label::no_pve},
      {"not a pve", Label::no_pve},
      {"no public value expression", Label::no_pve},
  };
  return kAliases;
}

std::optional<Label> resolve_label(std::string_view raw) {
  const std::string key = text::to_lower_ascii(text::collapse_whitespace(raw));
  for (const auto& [alias, label] : label_aliases()) {
    if (alias == key) return label;
  }
  return std::nullopt;
}

std::string canonical_suffix(Label l) {
  std::string s = "Based on these considerations, I would categorize this sentence as: ";
  s += label_display(l);
  s += '.';
  return s;
}

}  // namespace valuelens
