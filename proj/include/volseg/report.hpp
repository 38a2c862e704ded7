#pragma once

// Formatting helpers shared by the cohort and observer-study reports.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "volseg/stats.hpp"

namespace volseg::report {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// "0.85 (0.16)" style cell; "NA" when nothing was aggregated.
inline std::string mean_sd_cell(const std::optional<stats::MeanSd>& m, int decimals = 2) {
  if (!m) return "NA";
  return fixed(m->mean, decimals) + " (" + fixed(m->sd, decimals) + ")";
}

/// Shortest round-trippable decimal representation.
inline std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << csv_field(cells[i]);
  }
  os << '\n';
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json mean_sd_json(const std::optional<stats::MeanSd>& m) {
  if (!m) return nullptr;
  return {{"mean", m->mean}, {"sd", m->sd}, {"n", m->n}};
}

inline std::string optional_cell(const std::optional<double>& v) { return v ? exact(*v) : ""; }

}  // namespace volseg::report
