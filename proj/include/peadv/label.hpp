#pragma once

#include <string>
#include <string_view>

#include "peadv/errors.hpp"

namespace peadv {

enum class Label { benign = 0, malware = 1 };

inline const char* label_name(Label l) { return l == Label::benign ? "benign" : "malware"; }

inline Label opposite(Label l) { return l == Label::benign ? Label::malware : Label::benign; }

inline Label label_from_string(std::string_view s) {
  if (s == "benign") return Label::benign;
  if (s == "malware") return Label::malware;
  raise(Errc::config_error, "unknown class label '" + std::string(s) + "'");
}

}  // namespace peadv
