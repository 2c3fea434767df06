#pragma once

#include <compare>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xprobe {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class PromptError : public Error {
 public:
  using Error::Error;
};

class MetricsError : public Error {
 public:
  using Error::Error;
};

class TraceError : public Error {
 public:
  using Error::Error;
};

class RunError : public Error {
 public:
  using Error::Error;
};

enum class Task { translation, recall };
enum class EntityRole { subject, object };
enum class Variant { base, subsub, subinj };

std::string_view to_string(Task task);
std::string_view to_string(EntityRole role);
std::string_view to_string(Variant variant);

Task parse_task(std::string_view text);
EntityRole parse_role(std::string_view text);
Variant parse_variant(std::string_view text);

/// Unordered language pair, stored in declaration order (a before b).
struct LanguagePair {
  std::string a;
  std::string b;

  auto operator<=>(const LanguagePair&) const = default;
};

}  // namespace xprobe
