#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace xprobe {

/// How completion and answer strings are normalized before the inclusion check.
struct NormalizationPolicy {
  enum class UnicodeForm { none, canonical_compose };

  UnicodeForm unicode_form = UnicodeForm::canonical_compose;
  bool casefold = true;
  bool collapse_whitespace = true;

  /// Every transformation disabled: a plain byte-level substring check.
  static NormalizationPolicy verbatim() { return {UnicodeForm::none, false, false}; }

  std::string describe() const;
  bool operator==(const NormalizationPolicy&) const = default;
};

void to_json(nlohmann::json& out, const NormalizationPolicy& policy);
void from_json(const nlohmann::json& in, NormalizationPolicy& policy);

/// Applies NFC, full case folding and whitespace collapsing (runs of Unicode
/// white space become one ASCII space, ends trimmed) as the policy requests.
/// Invalid UTF-8 is passed through unchanged.
std::string normalize(std::string_view text, const NormalizationPolicy& policy);

}  // namespace xprobe
