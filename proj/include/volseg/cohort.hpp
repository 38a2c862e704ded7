#pragma once

// Cohort manifests, stratified evaluation, multi-model benchmarking and
// volumetric regression reports.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "volseg/agreement.hpp"
#include "volseg/error.hpp"
#include "volseg/groups.hpp"
#include "volseg/niftio.hpp"
#include "volseg/report.hpp"
#include "volseg/segmetrics.hpp"
#include "volseg/stats.hpp"
#include "volseg/volcore.hpp"

namespace volseg::cohort {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFormat = "volseg-cohort";
inline constexpr int kManifestVersion = 1;

struct CohortCase {
  std::string case_id;
  Group group = Group::kNormal;
  char sex = 'F';
  double age_years = 0;
  double field_strength = 1.5;
  bool fat_suppressed = false;
  fs::path image_path;
  fs::path reference_path;
  std::map<std::string, fs::path> prediction_paths;
  bool excluded = false;  // qc_status == excluded_low_quality
  std::string qc_reason;
};

struct CohortManifest {
  fs::path source;
  std::vector<CohortCase> cases;

  std::size_t count(Group g) const {
    return static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(), [&](const auto& c) { return c.group == g; }));
  }
};

struct LoadOptions {
  bool verify_files = true;  // included cases must have existing image and reference files
};

namespace detail {

inline std::string at_line(const fs::path& p, std::size_t line) { return p.string() + ":" + std::to_string(line); }

inline bool parse_bool(const std::string& s, const std::string& where) {
  if (s == "true" || s == "1" || s == "yes" || s == "Y" || s == "y") return true;
  if (s == "false" || s == "0" || s == "no" || s == "N" || s == "n" || s.empty()) return false;
  throw SchemaError(where + ": '" + s + "' is not a boolean");
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw SchemaError(where + ": '" + s + "' is not a number");
  return v;
}

inline void validate_case(CohortCase& c, const std::string& where) {
  if (c.case_id.empty()) throw SchemaError(where + ": field 'case_id' is empty");
  if (c.sex != 'F' && c.sex != 'M') throw SchemaError(where + ": field 'sex' must be F or M");
  if (!(c.age_years >= 0)) throw SchemaError(where + ": field 'age_years' must be >= 0");
  if (c.field_strength != 1.5 && c.field_strength != 3.0) {
    throw SchemaError(where + ": field 'field_strength' must be 1.5 or 3.0");
  }
}

inline void set_qc(CohortCase& c, const std::string& status, const std::string& where) {
  if (status.empty() || status == "included") c.excluded = false;
  else if (status == "excluded_low_quality") c.excluded = true;
  else throw SchemaError(where + ": field 'qc_status' must be included or excluded_low_quality");
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline void finish_manifest(CohortManifest& m, const LoadOptions& opt) {
  if (m.cases.empty()) throw SchemaError(m.source.string() + ": manifest has no cases");
  std::set<std::string> seen;
  for (const auto& c : m.cases) {
    if (!seen.insert(c.case_id).second) throw DuplicateCaseId("duplicate case id '" + c.case_id + "'");
  }
  if (!opt.verify_files) return;
  for (const auto& c : m.cases) {
    if (c.excluded) continue;
    for (const auto* p : {&c.image_path, &c.reference_path}) {
      if (!fs::is_regular_file(*p)) throw MissingFile("case '" + c.case_id + "': " + p->string());
    }
  }
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes, no embedded newlines.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

/// JSON-lines manifest. The first non-blank line is the header
/// {"format":"volseg-cohort","version":1}; every further line is one case.
/// Relative paths resolve against the manifest's directory.
inline CohortManifest load_manifest_jsonl(const fs::path& path, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  CohortManifest m;
  m.source = path;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = detail::at_line(path, lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where + ": " + e.what());
    }
    if (!j.is_object()) throw SchemaError(where + ": expected a JSON object");
    if (!have_header) {
      if (j.value("format", std::string()) != kManifestFormat) {
        throw SchemaError(where + ": field 'format' must be \"" + kManifestFormat + "\"");
      }
      if (j.value("version", 0) != kManifestVersion) throw SchemaError(where + ": field 'version' must be 1");
      have_header = true;
      continue;
    }
    CohortCase c;
    std::string field;
    try {
      for (const char* f : {"case_id", "group", "image_path", "reference_path"}) {
        field = f;
        if (!j.contains(f)) throw SchemaError(where + ": field '" + field + "' is required");
      }
      field = "case_id";
      c.case_id = j.at("case_id").get<std::string>();
      field = "group";
      c.group = parse_group(j.at("group").get<std::string>());
      field = "sex";
      const std::string sex = j.value("sex", std::string("F"));
      c.sex = sex.size() == 1 ? sex[0] : '?';
      field = "age_years";
      c.age_years = j.value("age_years", 0.0);
      field = "field_strength";
      c.field_strength = j.value("field_strength", 1.5);
      field = "fat_suppressed";
      c.fat_suppressed = j.value("fat_suppressed", false);
      field = "image_path";
      c.image_path = detail::resolve(base, j.at("image_path").get<std::string>());
      field = "reference_path";
      c.reference_path = detail::resolve(base, j.at("reference_path").get<std::string>());
      field = "prediction_paths";
      if (j.contains("prediction_paths")) {
        for (const auto& [model, p] : j.at("prediction_paths").items()) {
          c.prediction_paths[model] = detail::resolve(base, p.get<std::string>());
        }
      }
      field = "qc_status";
      detail::set_qc(c, j.value("qc_status", std::string("included")), where);
      field = "qc_reason";
      c.qc_reason = j.value("qc_reason", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where + ": field '" + field + "': " + e.what());
    } catch (const SchemaError& e) {
      if (e.detail().rfind(where, 0) == 0) throw;
      throw SchemaError(where + ": field '" + field + "': " + e.detail());
    }
    detail::validate_case(c, where);
    m.cases.push_back(std::move(c));
  }
  if (!have_header) throw SchemaError(path.string() + ": missing header line");
  detail::finish_manifest(m, opt);
  return m;
}

/// CSV importer. Required columns: case_id, group, image_path, reference_path.
/// Optional: sex, age_years, field_strength, fat_suppressed, qc_status,
/// qc_reason, and one "pred:<model>" column per prediction set.
inline CohortManifest load_manifest_csv(const fs::path& path, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  CohortManifest m;
  m.source = path;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    auto cells = detail::split_csv(line);
    const std::string where = detail::at_line(path, lineno);
    if (header.empty()) {
      header = std::move(cells);
      for (const char* f : {"case_id", "group", "image_path", "reference_path"}) {
        if (std::find(header.begin(), header.end(), f) == header.end()) {
          throw SchemaError(where + ": column '" + f + "' is required");
        }
      }
      continue;
    }
    if (cells.size() != header.size()) {
      throw SchemaError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(cells.size()));
    }
    CohortCase c;
    std::string qc = "included";
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string& col = header[i];
      const std::string& v = cells[i];
      const std::string fw = where + ": field '" + col + "'";
      if (col == "case_id") c.case_id = v;
      else if (col == "group") {
        try {
          c.group = parse_group(v);
        } catch (const SchemaError& e) {
          throw SchemaError(fw + ": " + e.detail());
        }
      } else if (col == "sex") c.sex = v.size() == 1 ? v[0] : '?';
      else if (col == "age_years") c.age_years = detail::parse_double(v, fw);
      else if (col == "field_strength") c.field_strength = detail::parse_double(v, fw);
      else if (col == "fat_suppressed") c.fat_suppressed = detail::parse_bool(v, fw);
      else if (col == "image_path") c.image_path = detail::resolve(base, v);
      else if (col == "reference_path") c.reference_path = detail::resolve(base, v);
      else if (col == "qc_status") qc = v;
      else if (col == "qc_reason") c.qc_reason = v;
      else if (col.rfind("pred:", 0) == 0) {
        if (!v.empty()) c.prediction_paths[col.substr(5)] = detail::resolve(base, v);
      }
    }
    detail::set_qc(c, qc, where);
    detail::validate_case(c, where);
    m.cases.push_back(std::move(c));
  }
  if (header.empty()) throw SchemaError(path.string() + ": empty file");
  detail::finish_manifest(m, opt);
  return m;
}

inline CohortManifest load_manifest(const fs::path& path, const LoadOptions& opt = {}) {
  if (!fs::exists(path)) throw MissingFile("manifest " + path.string());
  if (path.extension() == ".csv") return load_manifest_csv(path, opt);
  return load_manifest_jsonl(path, opt);
}

inline nlohmann::json case_to_json(const CohortCase& c, const fs::path& base = {}) {
  auto rel = [&](const fs::path& p) { return base.empty() ? p.string() : fs::relative(p, base).string(); };
  nlohmann::json j{{"case_id", c.case_id},
                   {"group", group_name(c.group)},
                   {"sex", std::string(1, c.sex)},
                   {"age_years", c.age_years},
                   {"field_strength", c.field_strength},
                   {"fat_suppressed", c.fat_suppressed},
                   {"image_path", rel(c.image_path)},
                   {"reference_path", rel(c.reference_path)},
                   {"qc_status", c.excluded ? "excluded_low_quality" : "included"}};
  if (!c.qc_reason.empty()) j["qc_reason"] = c.qc_reason;
  for (const auto& [model, p] : c.prediction_paths) j["prediction_paths"][model] = rel(p);
  return j;
}

/// Writes a JSON-lines manifest; paths are stored relative to the file's directory.
inline void save_manifest(const CohortManifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  out << nlohmann::json{{"format", kManifestFormat}, {"version", kManifestVersion}}.dump() << '\n';
  for (const auto& c : m.cases) {
    CohortCase abs = c;
    abs.image_path = fs::absolute(c.image_path);
    abs.reference_path = fs::absolute(c.reference_path);
    for (auto& [model, p] : abs.prediction_paths) p = fs::absolute(p);
    out << case_to_json(abs, base).dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Evaluation

/// Produces a prediction for a case whose manifest entry has no mask file for the model.
using Predictor = std::function<LabelMask(const CohortCase&)>;

struct CaseResult {
  std::string case_id;
  Group group = Group::kNormal;
  MetricsRecord metrics;
};

struct ExcludedCase {
  std::string case_id;
  Group group = Group::kNormal;
  std::string reason;
};

/// Cohort summary row. Means and SDs run over included cases, failures contributing
/// 0 to overlap metrics and nothing to HD95.
struct AggregateRow {
  std::string label;
  std::optional<stats::MeanSd> dsc, precision, accuracy, jaccard, recall, hd95;
  std::size_t n_included = 0;  // evaluated, not failed
  std::size_t n_failed = 0;
  std::size_t n_excluded = 0;
};

struct CohortEvaluation {
  std::string model;
  std::vector<CaseResult> cases;       // included cases, sorted by id
  std::vector<ExcludedCase> excluded;  // sorted by id
  std::vector<AggregateRow> rows;      // ALL, CP, AP, Normal

  const AggregateRow& row(std::string_view label) const {
    for (const auto& r : rows) {
      if (r.label == label) return r;
    }
    throw InvalidArgument("no aggregate row '" + std::string(label) + "'");
  }
};

inline constexpr const char* kAllLabel = "ALL";

namespace detail {

inline AggregateRow aggregate(std::string label, const std::vector<CaseResult>& cases,
                              const std::vector<ExcludedCase>& excluded, const std::optional<Group>& group) {
  AggregateRow row;
  row.label = std::move(label);
  std::vector<std::optional<double>> dsc, prec, acc, jac, rec, hd;
  for (const auto& c : cases) {
    if (group && c.group != *group) continue;
    (c.metrics.failure ? row.n_failed : row.n_included)++;
    dsc.push_back(c.metrics.dsc);
    prec.push_back(c.metrics.precision);
    acc.push_back(c.metrics.accuracy);
    jac.push_back(c.metrics.jaccard);
    rec.push_back(c.metrics.recall);
    hd.push_back(c.metrics.hd95_mm);
  }
  for (const auto& e : excluded) {
    if (!group || e.group == *group) ++row.n_excluded;
  }
  row.dsc = stats::summarize(dsc);
  row.precision = stats::summarize(prec);
  row.accuracy = stats::summarize(acc);
  row.jaccard = stats::summarize(jac);
  row.recall = stats::summarize(rec);
  row.hd95 = stats::summarize(hd);
  return row;
}

inline LabelMask prediction_for(const CohortCase& c, const std::string& model, const Predictor* predictor) {
  const auto it = c.prediction_paths.find(model);
  if (it != c.prediction_paths.end()) return nifti::read_mask_file(it->second);
  if (predictor && *predictor) return (*predictor)(c);
  throw MissingPrediction("case '" + c.case_id + "': no prediction for model '" + model + "'");
}

}  // namespace detail

/// Stratified aggregates from already-computed per-case results.
inline CohortEvaluation summarize_cohort(std::string model, std::vector<CaseResult> cases,
                                         std::vector<ExcludedCase> excluded) {
  auto by_id = [](const auto& a, const auto& b) { return a.case_id < b.case_id; };
  std::sort(cases.begin(), cases.end(), by_id);
  std::sort(excluded.begin(), excluded.end(), by_id);
  CohortEvaluation ev;
  ev.model = std::move(model);
  ev.rows.push_back(detail::aggregate(kAllLabel, cases, excluded, std::nullopt));
  for (Group g : {Group::kChronicPancreatitis, Group::kAcutePancreatitis, Group::kNormal}) {
    ev.rows.push_back(detail::aggregate(std::string(group_label(g)), cases, excluded, g));
  }
  ev.cases = std::move(cases);
  ev.excluded = std::move(excluded);
  return ev;
}

/// Evaluates one model over all included cases. Per-case errors are rethrown
/// with the case id prefixed.
inline CohortEvaluation evaluate_cohort(const CohortManifest& m, const std::string& model,
                                        const Predictor* predictor = nullptr) {
  std::vector<CaseResult> cases;
  std::vector<ExcludedCase> excluded;
  for (const auto& c : m.cases) {
    if (c.excluded) {
      excluded.push_back({c.case_id, c.group, c.qc_reason});
      continue;
    }
    try {
      const LabelMask ref = nifti::read_mask_file(c.reference_path);
      const LabelMask pred = detail::prediction_for(c, model, predictor);
      cases.push_back({c.case_id, c.group, evaluate_pair(SegmentationPair(pred, ref))});
    } catch (const Error& e) {
      if (e.detail().rfind("case '", 0) == 0) throw;
      throw Error(e.kind(), "case '" + c.case_id + "': " + e.detail());
    }
  }
  return summarize_cohort(model, std::move(cases), std::move(excluded));
}

/// Model comparison row: one model over all included cases.
struct BenchmarkRow {
  std::string model;
  std::optional<stats::MeanSd> dsc, jaccard, hd95;
  std::size_t n_included = 0;
  std::size_t n_failed = 0;
};

inline BenchmarkRow benchmark_row(const CohortEvaluation& ev) {
  const auto& all = ev.row(kAllLabel);
  return {ev.model, all.dsc, all.jaccard, all.hd95, all.n_included, all.n_failed};
}

/// One row per model, sorted by mean DSC descending (ties by model name).
inline std::vector<BenchmarkRow> benchmark(const CohortManifest& m, const std::vector<std::string>& models,
                                           const Predictor* predictor = nullptr) {
  if (models.size() < 2) throw InvalidArgument("benchmark needs at least two models");
  std::vector<BenchmarkRow> rows;
  for (const auto& model : models) rows.push_back(benchmark_row(evaluate_cohort(m, model, predictor)));
  std::stable_sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
    const double da = a.dsc ? a.dsc->mean : -1.0;
    const double db = b.dsc ? b.dsc->mean : -1.0;
    if (da != db) return da > db;
    return a.model < b.model;
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Volumetry

struct ScatterPoint {
  std::string case_id;
  Group group = Group::kNormal;
  double manual_ml = 0;
  double predicted_ml = 0;
};

struct StratumFit {
  std::string stratum;  // Normal, Diseased, ALL
  std::size_t n = 0;
  std::optional<RegressionFit> fit;
  std::string error;  // set when the fit is undefined (TooFewPoints / DegenerateX)
};

struct VolumeReport {
  std::string model;
  std::vector<ScatterPoint> points;  // sorted by case id
  std::vector<StratumFit> fits;      // Normal, Diseased, ALL
  std::vector<std::string> excluded; // QC-excluded and user-excluded ids

  const StratumFit& fit(std::string_view stratum) const {
    for (const auto& f : fits) {
      if (f.stratum == stratum) return f;
    }
    throw InvalidArgument("no stratum '" + std::string(stratum) + "'");
  }
};

/// OLS of predicted on manual volume for each stratum (x = manual mL).
inline VolumeReport volume_report_from_points(std::string model, std::vector<ScatterPoint> points) {
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
  VolumeReport r;
  r.model = std::move(model);
  auto fit = [&](std::string name, auto keep) {
    StratumFit f;
    f.stratum = std::move(name);
    std::vector<double> xs, ys;
    for (const auto& p : points) {
      if (!keep(p)) continue;
      xs.push_back(p.manual_ml);
      ys.push_back(p.predicted_ml);
    }
    f.n = xs.size();
    try {
      f.fit = ols_fit(xs, ys);
    } catch (const Error& e) {
      f.error = e.what();
    }
    r.fits.push_back(std::move(f));
  };
  fit("Normal", [](const ScatterPoint& p) { return !is_diseased(p.group); });
  fit("Diseased", [](const ScatterPoint& p) { return is_diseased(p.group); });
  fit("ALL", [](const ScatterPoint&) { return true; });
  r.points = std::move(points);
  return r;
}

/// Manual vs predicted volumes over included cases not named in `exclusions`.
inline VolumeReport volume_report(const CohortManifest& m, const std::string& model,
                                  const std::set<std::string>& exclusions = {}, const Predictor* predictor = nullptr) {
  std::vector<ScatterPoint> points;
  std::vector<std::string> excluded;
  for (const auto& c : m.cases) {
    if (c.excluded || exclusions.count(c.case_id)) {
      excluded.push_back(c.case_id);
      continue;
    }
    try {
      const LabelMask ref = nifti::read_mask_file(c.reference_path);
      const LabelMask pred = detail::prediction_for(c, model, predictor);
      const auto v = volumes(SegmentationPair(pred, ref));
      points.push_back({c.case_id, c.group, v.ref_ml, v.pred_ml});
    } catch (const Error& e) {
      if (e.detail().rfind("case '", 0) == 0) throw;
      throw Error(e.kind(), "case '" + c.case_id + "': " + e.detail());
    }
  }
  for (const auto& id : exclusions) {
    if (std::none_of(m.cases.begin(), m.cases.end(), [&](const auto& c) { return c.case_id == id; })) {
      throw InvalidArgument("exclusion list names unknown case '" + id + "'");
    }
  }
  auto r = volume_report_from_points(model, std::move(points));
  std::sort(excluded.begin(), excluded.end());
  r.excluded = std::move(excluded);
  return r;
}

// ---------------------------------------------------------------------------
// Report emission

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{"Group",        "DSC (SD)",    "Precision (SD)", "Accuracy (SD)",
                                             "Jaccard (SD)", "Recall (SD)", "HD95 (SD)",      "n_included",
                                             "n_failed",     "n_excluded"};
  return cols;
}

inline std::vector<std::string> summary_cells(const AggregateRow& r, int decimals = 2) {
  return {r.label,
          report::mean_sd_cell(r.dsc, decimals),
          report::mean_sd_cell(r.precision, decimals),
          report::mean_sd_cell(r.accuracy, decimals),
          report::mean_sd_cell(r.jaccard, decimals),
          report::mean_sd_cell(r.recall, decimals),
          report::mean_sd_cell(r.hd95, decimals),
          std::to_string(r.n_included),
          std::to_string(r.n_failed),
          std::to_string(r.n_excluded)};
}

/// Cohort summary layout.
inline void write_summary_csv(std::ostream& os, const CohortEvaluation& ev, int decimals = 2) {
  report::write_csv_row(os, summary_columns());
  for (const auto& r : ev.rows) report::write_csv_row(os, summary_cells(r, decimals));
}

/// Every manifest case exactly once, with status included / failed / excluded.
inline void write_cases_csv(std::ostream& os, const CohortEvaluation& ev) {
  report::write_csv_row(os, {"case_id", "group", "status", "dsc", "precision", "accuracy", "jaccard", "recall",
                             "hd95_mm", "volume_pred_ml", "volume_ref_ml", "volume_error_ml", "qc_reason"});
  struct Line {
    std::string id;
    std::vector<std::string> cells;
  };
  std::vector<Line> lines;
  for (const auto& c : ev.cases) {
    const auto& m = c.metrics;
    lines.push_back({c.case_id,
                     {c.case_id, std::string(group_name(c.group)), m.failure ? "failed" : "included",
                      report::optional_cell(m.dsc), report::optional_cell(m.precision),
                      report::optional_cell(m.accuracy), report::optional_cell(m.jaccard),
                      report::optional_cell(m.recall), report::optional_cell(m.hd95_mm),
                      report::exact(m.volume_pred_ml), report::exact(m.volume_ref_ml),
                      report::exact(m.volume_error_ml), ""}});
  }
  for (const auto& e : ev.excluded) {
    lines.push_back({e.case_id,
                     {e.case_id, std::string(group_name(e.group)), "excluded", "", "", "", "", "", "", "", "", "",
                      e.reason}});
  }
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  for (const auto& l : lines) report::write_csv_row(os, l.cells);
}

inline nlohmann::json aggregate_json(const AggregateRow& r) {
  return {{"group", r.label},
          {"n_included", r.n_included},
          {"n_failed", r.n_failed},
          {"n_excluded", r.n_excluded},
          {"dsc", report::mean_sd_json(r.dsc)},
          {"precision", report::mean_sd_json(r.precision)},
          {"accuracy", report::mean_sd_json(r.accuracy)},
          {"jaccard", report::mean_sd_json(r.jaccard)},
          {"recall", report::mean_sd_json(r.recall)},
          {"hd95_mm", report::mean_sd_json(r.hd95)}};
}

inline nlohmann::json evaluation_json(const CohortEvaluation& ev) {
  nlohmann::json j;
  j["model"] = ev.model;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : ev.rows) j["rows"].push_back(aggregate_json(r));
  j["cases"] = nlohmann::json::array();
  for (const auto& c : ev.cases) {
    const auto& m = c.metrics;
    j["cases"].push_back({{"case_id", c.case_id},
                          {"group", group_name(c.group)},
                          {"failure", m.failure},
                          {"dsc", report::optional_json(m.dsc)},
                          {"precision", report::optional_json(m.precision)},
                          {"accuracy", report::optional_json(m.accuracy)},
                          {"jaccard", report::optional_json(m.jaccard)},
                          {"recall", report::optional_json(m.recall)},
                          {"hd95_mm", report::optional_json(m.hd95_mm)},
                          {"volume_pred_ml", m.volume_pred_ml},
                          {"volume_ref_ml", m.volume_ref_ml}});
  }
  j["excluded"] = nlohmann::json::array();
  for (const auto& e : ev.excluded) {
    j["excluded"].push_back({{"case_id", e.case_id}, {"group", group_name(e.group)}, {"reason", e.reason}});
  }
  return j;
}

/// One JSON object per manifest case, sorted by case id; excluded cases carry their reason.
inline void write_cases_jsonl(std::ostream& os, const CohortEvaluation& ev) {
  const nlohmann::json j = evaluation_json(ev);
  std::vector<nlohmann::json> lines(j["cases"].begin(), j["cases"].end());
  for (auto e : j["excluded"]) {
    e["excluded"] = true;
    lines.push_back(std::move(e));
  }
  std::sort(lines.begin(), lines.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
    return a["case_id"].get<std::string>() < b["case_id"].get<std::string>();
  });
  for (const auto& l : lines) os << l.dump() << '\n';
}

/// Model comparison layout.
inline void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows, int decimals = 2) {
  report::write_csv_row(os, {"Model", "DSC (SD)", "Jaccard (SD)", "HD95 (SD)", "n_included", "n_failed"});
  for (const auto& r : rows) {
    report::write_csv_row(os, {r.model, report::mean_sd_cell(r.dsc, decimals),
                               report::mean_sd_cell(r.jaccard, decimals), report::mean_sd_cell(r.hd95, decimals),
                               std::to_string(r.n_included), std::to_string(r.n_failed)});
  }
}

inline nlohmann::json benchmark_json(const std::vector<BenchmarkRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"model", r.model},
                 {"dsc", report::mean_sd_json(r.dsc)},
                 {"jaccard", report::mean_sd_json(r.jaccard)},
                 {"hd95_mm", report::mean_sd_json(r.hd95)},
                 {"n_included", r.n_included},
                 {"n_failed", r.n_failed}});
  }
  return j;
}

inline void write_scatter_csv(std::ostream& os, const VolumeReport& r) {
  report::write_csv_row(os, {"case_id", "group", "manual_ml", "predicted_ml"});
  for (const auto& p : r.points) {
    report::write_csv_row(os, {p.case_id, std::string(group_name(p.group)), report::exact(p.manual_ml),
                               report::exact(p.predicted_ml)});
  }
}

inline void write_regression_csv(std::ostream& os, const VolumeReport& r) {
  report::write_csv_row(os, {"Stratum", "n", "slope", "intercept", "R2", "note"});
  for (const auto& f : r.fits) {
    if (f.fit) {
      report::write_csv_row(os, {f.stratum, std::to_string(f.n), report::exact(f.fit->slope),
                                 report::exact(f.fit->intercept), report::exact(f.fit->r_squared), ""});
    } else {
      report::write_csv_row(os, {f.stratum, std::to_string(f.n), "", "", "", f.error});
    }
  }
}

inline nlohmann::json volume_json(const VolumeReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["excluded"] = r.excluded;
  j["fits"] = nlohmann::json::array();
  for (const auto& f : r.fits) {
    nlohmann::json e{{"stratum", f.stratum}, {"n", f.n}};
    if (f.fit) {
      e["slope"] = f.fit->slope;
      e["intercept"] = f.fit->intercept;
      e["r_squared"] = f.fit->r_squared;
    } else {
      e["error"] = f.error;
    }
    j["fits"].push_back(std::move(e));
  }
  return j;
}

namespace detail {

template <typename Fn>
void write_text(const fs::path& p, Fn&& fn) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  fn(out);
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace detail

/// Writes summary.csv, cases.csv and summary.json into `dir`, plus
/// scatter.csv and regression.csv when a volume report is given.
inline void write_report(const fs::path& dir, const CohortEvaluation& ev, const VolumeReport* volumes = nullptr) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());
  detail::write_text(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, ev); });
  detail::write_text(dir / "cases.csv", [&](std::ostream& os) { write_cases_csv(os, ev); });
  detail::write_text(dir / "cases.jsonl", [&](std::ostream& os) { write_cases_jsonl(os, ev); });
  nlohmann::json j = evaluation_json(ev);
  if (volumes) {
    detail::write_text(dir / "scatter.csv", [&](std::ostream& os) { write_scatter_csv(os, *volumes); });
    detail::write_text(dir / "regression.csv", [&](std::ostream& os) { write_regression_csv(os, *volumes); });
    j["volumes"] = volume_json(*volumes);
  }
  detail::write_text(dir / "summary.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

}  // namespace volseg::cohort
