#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace valuelens {

enum class Label { d_pve, c_pve, no_pve };

inline constexpr std::array<Label, 3> kLabels = {Label::d_pve, Label::c_pve, Label::no_pve};

// "D_PVE", "C_PVE", "NO_PVE": the form written to JSON files and accepted on
// the command line.
std::string_view label_code(Label l);

// "Direct PVE", "Contextual PVE", "No PVE": the form used in prompts and in
// the canonical rationale suffix.
std::string_view label_display(Label l);

// Every accepted spelling, lowercase and single-spaced. Resolution lowercases
// and collapses whitespace before lookup, so "No-PVE", "NO PVE" and "no_pve"
// all resolve.
const std::vector<std::pair<std::string, Label>>& label_aliases();

std::optional<Label> resolve_label(std::string_view text);

// The assistant-turn ending that carries the final label.
std::string canonical_suffix(Label l);

}  // namespace valuelens
