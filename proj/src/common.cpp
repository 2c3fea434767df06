#include "xprobe/common.hpp"

namespace xprobe {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::translation: return "translation";
    case Task::recall: return "recall";
  }
  return "?";
}

std::string_view to_string(EntityRole role) {
  switch (role) {
    case EntityRole::subject: return "subject";
    case EntityRole::object: return "object";
  }
  return "?";
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::base: return "base";
    case Variant::subsub: return "subsub";
    case Variant::subinj: return "subinj";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  if (text == "translation") return Task::translation;
  if (text == "recall") return Task::recall;
  throw Error("unknown task '" + std::string(text) + "' (expected translation|recall)");
}

EntityRole parse_role(std::string_view text) {
  if (text == "subject") return EntityRole::subject;
  if (text == "object") return EntityRole::object;
  throw Error("unknown entity role '" + std::string(text) + "' (expected subject|object)");
}

Variant parse_variant(std::string_view text) {
  if (text == "base") return Variant::base;
  if (text == "subsub") return Variant::subsub;
  if (text == "subinj") return Variant::subinj;
  throw Error("unknown variant '" + std::string(text) + "' (expected base|subsub|subinj)");
}

}  // namespace xprobe
