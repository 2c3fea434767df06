#include "xprobe/normalize.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "xprobe/common.hpp"

namespace xprobe {
namespace {

using nlohmann::json;

bool valid_utf8(std::string_view text) {
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  for (int32_t i = 0; i < length;) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) return false;
  }
  return true;
}

icu::UnicodeString collapse(const icu::UnicodeString& in) {
  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < in.length();) {
    const UChar32 c = in.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !out.isEmpty();
      continue;
    }
    if (pending_space) out.append(static_cast<UChar>(0x20));
    pending_space = false;
    out.append(c);
  }
  return out;
}

}  // namespace

std::string NormalizationPolicy::describe() const {
  std::string out = unicode_form == UnicodeForm::canonical_compose ? "nfc" : "raw";
  out += casefold ? "+casefold" : "";
  out += collapse_whitespace ? "+ws" : "";
  return out;
}

void to_json(json& out, const NormalizationPolicy& policy) {
  out = json{{"unicode_form", policy.unicode_form == NormalizationPolicy::UnicodeForm::canonical_compose
                                  ? "canonical-compose"
                                  : "none"},
             {"casefold", policy.casefold},
             {"collapse_whitespace", policy.collapse_whitespace}};
}

void from_json(const json& in, NormalizationPolicy& policy) {
  const auto form = in.at("unicode_form").get<std::string>();
  if (form == "canonical-compose") {
    policy.unicode_form = NormalizationPolicy::UnicodeForm::canonical_compose;
  } else if (form == "none") {
    policy.unicode_form = NormalizationPolicy::UnicodeForm::none;
  } else {
    throw Error("unknown unicode_form '" + form + "'");
  }
  policy.casefold = in.at("casefold").get<bool>();
  policy.collapse_whitespace = in.at("collapse_whitespace").get<bool>();
}

std::string normalize(std::string_view text, const NormalizationPolicy& policy) {
  const bool any = policy.unicode_form != NormalizationPolicy::UnicodeForm::none ||
                   policy.casefold || policy.collapse_whitespace;
  if (!any || !valid_utf8(text)) return std::string(text);

  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");

  if (policy.unicode_form == NormalizationPolicy::UnicodeForm::canonical_compose) {
    u = nfc->normalize(u, status);
  }
  if (policy.casefold) {
    u.foldCase(U_FOLD_CASE_DEFAULT);
    // Folding can decompose (e.g. U+0130); recompose so both sides agree.
    if (policy.unicode_form == NormalizationPolicy::UnicodeForm::canonical_compose) {
      u = nfc->normalize(u, status);
    }
  }
  if (U_FAILURE(status)) throw Error("ICU normalization failed");
  if (policy.collapse_whitespace) u = collapse(u);

  std::string out;
  u.toUTF8String(out);
  return out;
}

}  // namespace xprobe
