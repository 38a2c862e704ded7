#pragma once

#include <array>
#include <string>
#include <string_view>

#include "volseg/error.hpp"

namespace volseg {

enum class Group { kNormal, kAcutePancreatitis, kChronicPancreatitis };

inline constexpr std::array<Group, 3> kAllGroups = {Group::kNormal, Group::kAcutePancreatitis,
                                                    Group::kChronicPancreatitis};

/// Canonical manifest spelling.
inline std::string_view group_name(Group g) {
  switch (g) {
    case Group::kNormal: return "Normal";
    case Group::kAcutePancreatitis: return "AcutePancreatitis";
    case Group::kChronicPancreatitis: return "ChronicPancreatitis";
  }
  return "?";
}

/// Row label used in report tables.
inline std::string_view group_label(Group g) {
  switch (g) {
    case Group::kNormal: return "Normal";
    case Group::kAcutePancreatitis: return "Acute Pancreatitis";
    case Group::kChronicPancreatitis: return "Chronic Pancreatitis";
  }
  return "?";
}

inline bool is_diseased(Group g) { return g != Group::kNormal; }

inline Group parse_group(std::string_view s) {
  if (s == "Normal" || s == "normal" || s == "Healthy" || s == "healthy") return Group::kNormal;
  if (s == "AcutePancreatitis" || s == "AP" || s == "acute") return Group::kAcutePancreatitis;
  if (s == "ChronicPancreatitis" || s == "CP" || s == "chronic") return Group::kChronicPancreatitis;
  throw SchemaError("unknown group '" + std::string(s) +
                    "' (expected Normal, AcutePancreatitis or ChronicPancreatitis)");
}

}  // namespace volseg
