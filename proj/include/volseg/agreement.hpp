#pragma once

// Observer agreement (voxelwise Cohen's kappa, inter/intra-observer studies)
// and simple linear regression of predicted against manual volumes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "volseg/error.hpp"
#include "volseg/groups.hpp"
#include "volseg/niftio.hpp"
#include "volseg/reference_targets.hpp"
#include "volseg/report.hpp"
#include "volseg/segmetrics.hpp"
#include "volseg/stats.hpp"
#include "volseg/volcore.hpp"

namespace volseg {

// ---------------------------------------------------------------------------
// Cohen's kappa

struct KappaResult {
  std::optional<double> kappa;  // undefined when expected agreement is 1
  double observed_agreement = 0;
  double expected_agreement = 0;
  std::uint64_t n_voxels = 0;
};

/// Kappa from a 2x2 contingency table; n10 counts rater A = 1, rater B = 0.
inline KappaResult kappa_from_contingency(std::uint64_t n11, std::uint64_t n10, std::uint64_t n01,
                                          std::uint64_t n00) {
  KappaResult r;
  r.n_voxels = n11 + n10 + n01 + n00;
  if (r.n_voxels == 0) throw InvalidArgument("kappa over zero voxels");
  const double n = static_cast<double>(r.n_voxels);
  const double a1 = static_cast<double>(n11 + n10), a0 = static_cast<double>(n01 + n00);
  const double b1 = static_cast<double>(n11 + n01), b0 = static_cast<double>(n10 + n00);
  r.observed_agreement = static_cast<double>(n11 + n00) / n;
  r.expected_agreement = (a1 * b1 + a0 * b0) / (n * n);
  // p_e == 1 exactly when both raters are constant and equal.
  const bool chance_is_certain = (n11 == r.n_voxels) || (n00 == r.n_voxels);
  if (chance_is_certain) {
    r.expected_agreement = 1.0;
    r.observed_agreement = 1.0;
    return r;
  }
  r.kappa = (r.observed_agreement - r.expected_agreement) / (1.0 - r.expected_agreement);
  return r;
}

inline KappaResult cohen_kappa(const LabelMask& a, const LabelMask& b) {
  require_same_lattice(a.geometry(), b.geometry(), "cohen_kappa");
  std::uint64_t n[4] = {0, 0, 0, 0};
  const auto va = a.voxels();
  const auto vb = b.voxels();
  for (std::size_t i = 0; i < va.size(); ++i) ++n[(va[i] << 1) | vb[i]];
  return kappa_from_contingency(n[3], n[2], n[1], n[0]);
}

// ---------------------------------------------------------------------------
// Ordinary least squares with intercept

struct RegressionFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::size_t n = 0;
};

/// Fits ys = slope * xs + intercept. R^2 = 1 - SSE/SST with SST about mean(ys);
/// a constant ys series that is fitted exactly reports R^2 = 1.
inline RegressionFit ols_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("ols_fit: xs and ys differ in length");
  if (xs.size() < 2) throw TooFewPoints("ols_fit needs at least 2 points, got " + std::to_string(xs.size()));
  const double mx = stats::mean(xs);
  const double my = stats::mean(ys);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DegenerateX("all x values are equal");
  RegressionFit f;
  f.n = xs.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (f.slope * xs[i] + f.intercept);
    sse += e * e;
  }
  f.r_squared = syy > 0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  return f;
}

// ---------------------------------------------------------------------------
// Observer studies

enum class StudyMode { kInter, kIntra };

inline std::string_view study_mode_name(StudyMode m) { return m == StudyMode::kInter ? "inter" : "intra"; }
inline std::string_view study_mode_label(StudyMode m) {
  return m == StudyMode::kInter ? "Inter-observer" : "Intra-observer";
}

struct ObserverCase {
  std::string case_id;
  Group group = Group::kNormal;
  std::filesystem::path mask_a;
  std::filesystem::path mask_b;
  std::string reader_a;
  std::string reader_b;
  int session_a = 1;
  int session_b = 1;
};

struct ObserverStudy {
  StudyMode mode = StudyMode::kInter;
  std::vector<ObserverCase> cases;
};

struct ObserverCaseResult {
  std::string case_id;
  Group group = Group::kNormal;
  MetricsRecord metrics;  // rater B taken as reference
  KappaResult kappa;
};

/// One agreement row: mean (SD) per metric over a stratum.
struct ObserverRow {
  std::string stratum;
  std::size_t n_cases = 0;
  std::optional<stats::MeanSd> dsc, precision, jaccard, recall, hd95, kappa;
};

struct ObserverSummary {
  StudyMode mode = StudyMode::kInter;
  std::vector<ObserverCaseResult> cases;  // sorted by case id
  std::vector<ObserverRow> rows;          // Pancreatitis, Healthy, ALL
};

namespace detail {

inline void validate_study_case(StudyMode mode, const ObserverCase& c) {
  if (mode == StudyMode::kIntra) {
    if (c.reader_a.empty() || c.reader_a != c.reader_b) {
      throw SchemaError("case '" + c.case_id + "': intra-observer pairs must come from the same reader");
    }
    if (c.session_a == c.session_b) {
      throw SchemaError("case '" + c.case_id + "': intra-observer pairs need two distinct sessions");
    }
  } else if (!c.reader_a.empty() && c.reader_a == c.reader_b) {
    throw SchemaError("case '" + c.case_id + "': inter-observer pairs must come from different readers");
  }
}

template <typename Pred>
ObserverRow summarize_observer(std::string stratum, const std::vector<ObserverCaseResult>& cases, Pred keep) {
  ObserverRow row;
  row.stratum = std::move(stratum);
  std::vector<std::optional<double>> dsc, prec, jac, rec, hd, kap;
  for (const auto& c : cases) {
    if (!keep(c)) continue;
    ++row.n_cases;
    dsc.push_back(c.metrics.dsc);
    prec.push_back(c.metrics.precision);
    jac.push_back(c.metrics.jaccard);
    rec.push_back(c.metrics.recall);
    hd.push_back(c.metrics.hd95_mm);
    kap.push_back(c.kappa.kappa);
  }
  row.dsc = stats::summarize(dsc);
  row.precision = stats::summarize(prec);
  row.jaccard = stats::summarize(jac);
  row.recall = stats::summarize(rec);
  row.hd95 = stats::summarize(hd);
  row.kappa = stats::summarize(kap);
  return row;
}

}  // namespace detail

/// Compares two raters' masks for one case.
inline ObserverCaseResult evaluate_observer_case(std::string case_id, Group group, const LabelMask& a,
                                                 const LabelMask& b) {
  ObserverCaseResult r;
  r.case_id = std::move(case_id);
  r.group = group;
  r.kappa = cohen_kappa(a, b);
  r.metrics = evaluate_pair(SegmentationPair(a, b));
  return r;
}

inline ObserverSummary summarize_observer_study(StudyMode mode, std::vector<ObserverCaseResult> cases) {
  std::sort(cases.begin(), cases.end(),
            [](const auto& x, const auto& y) { return x.case_id < y.case_id; });
  ObserverSummary s;
  s.mode = mode;
  s.rows.push_back(detail::summarize_observer("Pancreatitis", cases,
                                              [](const auto& c) { return is_diseased(c.group); }));
  s.rows.push_back(detail::summarize_observer("Healthy", cases,
                                              [](const auto& c) { return !is_diseased(c.group); }));
  s.rows.push_back(detail::summarize_observer("ALL", cases, [](const auto&) { return true; }));
  s.cases = std::move(cases);
  return s;
}

/// Loads every referenced mask pair and summarizes agreement. Errors carry the case id.
inline ObserverSummary run_observer_study(const ObserverStudy& study) {
  if (study.cases.empty()) throw SchemaError("observer study has no cases");
  std::vector<ObserverCaseResult> results;
  std::map<std::string, bool> seen;
  for (const auto& c : study.cases) {
    if (seen[c.case_id]) throw DuplicateCaseId("duplicate case id '" + c.case_id + "'");
    seen[c.case_id] = true;
    detail::validate_study_case(study.mode, c);
    try {
      results.push_back(evaluate_observer_case(c.case_id, c.group, nifti::read_mask_file(c.mask_a),
                                               nifti::read_mask_file(c.mask_b)));
    } catch (const Error& e) {
      throw Error(e.kind(), "case '" + c.case_id + "': " + e.detail());
    }
  }
  return summarize_observer_study(study.mode, std::move(results));
}

/// Study manifest: JSON lines. First line {"format":"volseg-study","version":1,"mode":"inter"|"intra"};
/// each further line one case with case_id, group, mask_a, mask_b and optional
/// reader_a/reader_b/session_a/session_b. Relative paths resolve against the file's directory.
inline ObserverStudy load_study(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open study manifest " + path.string());
  const auto base = path.parent_path();
  ObserverStudy study;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto where = [&](const std::string& field) {
      return path.string() + ":" + std::to_string(lineno) + ": field '" + field + "'";
    };
    try {
      if (!have_header) {
        if (j.value("format", "") != "volseg-study") throw SchemaError(where("format") + " must be \"volseg-study\"");
        if (j.value("version", 0) != 1) throw SchemaError(where("version") + " must be 1");
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "inter") study.mode = StudyMode::kInter;
        else if (mode == "intra") study.mode = StudyMode::kIntra;
        else throw SchemaError(where("mode") + " must be \"inter\" or \"intra\"");
        have_header = true;
        continue;
      }
      ObserverCase c;
      for (const char* f : {"case_id", "group", "mask_a", "mask_b"}) {
        if (!j.contains(f)) throw SchemaError(where(f) + " is required");
      }
      c.case_id = j.at("case_id").get<std::string>();
      c.group = parse_group(j.at("group").get<std::string>());
      c.mask_a = base / j.at("mask_a").get<std::string>();
      c.mask_b = base / j.at("mask_b").get<std::string>();
      c.reader_a = j.value("reader_a", "");
      c.reader_b = j.value("reader_b", "");
      c.session_a = j.value("session_a", 1);
      c.session_b = j.value("session_b", 1);
      study.cases.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw SchemaError(path.string() + ": missing header line");
  if (study.cases.empty()) throw SchemaError(path.string() + ": no cases");
  return study;
}

/// Agreement table layout: Evaluations, Group, DSC, Precision, Jaccard, Recall, HD95, Kappa.
inline void write_observer_csv(std::ostream& os, const ObserverSummary& s, int decimals = 2) {
  report::write_csv_row(os, {"Evaluations", "Group", "DSC (SD)", "Precision (SD)", "Jaccard (SD)",
                             "Recall (SD)", "HD95 (SD)", "Kappa (SD)", "n_cases"});
  for (const auto& r : s.rows) {
    report::write_csv_row(os, {std::string(study_mode_label(s.mode)), r.stratum,
                               report::mean_sd_cell(r.dsc, decimals), report::mean_sd_cell(r.precision, decimals),
                               report::mean_sd_cell(r.jaccard, decimals), report::mean_sd_cell(r.recall, decimals),
                               report::mean_sd_cell(r.hd95, decimals), report::mean_sd_cell(r.kappa, decimals),
                               std::to_string(r.n_cases)});
  }
}

inline nlohmann::json observer_json(const ObserverSummary& s) {
  nlohmann::json j;
  j["mode"] = study_mode_name(s.mode);
  // Published kappa for comparison; the intra-observer value is ambiguous in the source.
  auto kappa_pair = [](const reference::KappaTarget& k) {
    return nlohmann::json{{"Pancreatitis", k.pancreatitis}, {"Healthy", k.healthy}};
  };
  if (s.mode == StudyMode::kInter) {
    j["reference_kappa"] = nlohmann::json::array({kappa_pair(reference::kInterKappa)});
  } else {
    j["reference_kappa"] = nlohmann::json::array(
        {kappa_pair(reference::kIntraKappaSummary), kappa_pair(reference::kIntraKappaResults)});
    j["reference_kappa_note"] = "two conflicting published intra-observer kappa pairs; not resolved";
  }
  for (const auto& r : s.rows) {
    j["rows"].push_back({{"evaluations", study_mode_label(s.mode)},
                         {"group", r.stratum},
                         {"n_cases", r.n_cases},
                         {"dsc", report::mean_sd_json(r.dsc)},
                         {"precision", report::mean_sd_json(r.precision)},
                         {"jaccard", report::mean_sd_json(r.jaccard)},
                         {"recall", report::mean_sd_json(r.recall)},
                         {"hd95_mm", report::mean_sd_json(r.hd95)},
                         {"kappa", report::mean_sd_json(r.kappa)}});
  }
  for (const auto& c : s.cases) {
    j["cases"].push_back({{"case_id", c.case_id},
                          {"group", group_name(c.group)},
                          {"dsc", report::optional_json(c.metrics.dsc)},
                          {"precision", report::optional_json(c.metrics.precision)},
                          {"jaccard", report::optional_json(c.metrics.jaccard)},
                          {"recall", report::optional_json(c.metrics.recall)},
                          {"hd95_mm", report::optional_json(c.metrics.hd95_mm)},
                          {"kappa", report::optional_json(c.kappa.kappa)},
                          {"observed_agreement", c.kappa.observed_agreement},
                          {"expected_agreement", c.kappa.expected_agreement}});
  }
  return j;
}

}  // namespace volseg
