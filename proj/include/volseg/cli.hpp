#pragma once

// Command-line front end. run_cli() is the whole program minus main(), so it
// can be driven from tests with captured streams.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "volseg/agreement.hpp"
#include "volseg/cohort.hpp"
#include "volseg/error.hpp"
#include "volseg/niftio.hpp"
#include "volseg/phantom.hpp"
#include "volseg/segmetrics.hpp"
#include "volseg/segnet.hpp"
#include "volseg/service/server.hpp"

namespace volseg::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kDefaultPort = 8080;

namespace detail {

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline segnet::NetworkConfig load_config(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_text(p)).get<segnet::NetworkConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(p.string() + ": " + e.what());
  }
}

/// Training data from a cohort manifest: included cases' image + reference.
inline std::vector<segnet::TrainSample> load_training_data(const fs::path& manifest) {
  const auto m = cohort::load_manifest(manifest);
  std::vector<segnet::TrainSample> out;
  for (const auto& c : m.cases) {
    if (c.excluded) continue;
    try {
      const auto img = nifti::read_nifti_file(c.image_path);
      out.emplace_back(segnet::zscore_normalize(img.grid), nifti::read_mask_file(c.reference_path));
    } catch (const Error& e) {
      throw Error(e.kind(), "case '" + c.case_id + "': " + e.detail());
    }
  }
  return out;
}

/// "T2=path" or a bare path (taken as T2).
inline std::pair<std::string, fs::path> parse_weights_arg(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {"T2", s};
  const std::string modality = s.substr(0, eq);
  if (!service::known_modality(modality)) {
    throw InvalidArgument("unknown modality '" + modality + "' in --weights (expected T1 or T2)");
  }
  return {modality, s.substr(eq + 1)};
}

inline nlohmann::json metrics_json(const MetricsRecord& r) { return service::Service::metrics_json(r); }

inline std::set<std::string> read_exclusions(const std::vector<std::string>& ids, const std::string& file) {
  std::set<std::string> out(ids.begin(), ids.end());
  if (!file.empty()) {
    std::stringstream ss(read_text(file));
    std::string line;
    while (std::getline(ss, line)) {
      line.erase(line.find_last_not_of(" \t\r") + 1);
      if (!line.empty() && line[0] != '#') out.insert(line);
    }
  }
  return out;
}

}  // namespace detail

/// Runs one invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors, 2 on data errors.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Volumetric segmentation toolkit", "volseg"};
  app.require_subcommand(1);

  // segment
  auto* seg = app.add_subcommand("segment", "Segment a NIFTI volume with trained weights");
  std::string seg_in, seg_weights, seg_modality = "T2", seg_out;
  bool seg_json = false;
  seg->add_option("input", seg_in, "Input image (.nii or .nii.gz)")->required();
  seg->add_option("--weights", seg_weights, "Weights file")->required();
  seg->add_option("--modality", seg_modality, "Image modality")->check(CLI::IsMember({"T1", "T2"}));
  seg->add_option("--out", seg_out, "Output mask path")->required();
  seg->add_flag("--json", seg_json, "Print a JSON summary");

  // metrics
  auto* met = app.add_subcommand("metrics", "Compare a predicted mask with a reference mask");
  std::string met_pred, met_ref;
  bool met_json = false;
  met->add_option("--pred", met_pred, "Predicted mask")->required();
  met->add_option("--ref", met_ref, "Reference mask")->required();
  met->add_flag("--json", met_json, "Machine-readable output");

  // cohort-eval
  auto* coh = app.add_subcommand("cohort-eval", "Evaluate one model over a cohort manifest");
  std::string coh_manifest, coh_model, coh_report, coh_weights, coh_exclude_file;
  std::vector<std::string> coh_exclude;
  bool coh_json = false;
  coh->add_option("--manifest", coh_manifest, "Cohort manifest (.jsonl or .csv)")->required();
  coh->add_option("--model", coh_model, "Model name in prediction_paths")->required();
  coh->add_option("--report", coh_report, "Report output directory")->required();
  coh->add_option("--weights", coh_weights, "Run inference with these weights where no mask file is listed");
  coh->add_option("--exclude", coh_exclude, "Case ids left out of the volume regression");
  coh->add_option("--exclude-file", coh_exclude_file, "File with one excluded case id per line");
  coh->add_flag("--json", coh_json, "Print summary.json to stdout");

  // benchmark
  auto* ben = app.add_subcommand("benchmark", "Compare several models over a cohort");
  std::string ben_manifest, ben_models, ben_out;
  bool ben_json = false;
  ben->add_option("--manifest", ben_manifest, "Cohort manifest")->required();
  ben->add_option("--models", ben_models, "Comma-separated model names")->required();
  ben->add_option("--out", ben_out, "Also write the table to this CSV file");
  ben->add_flag("--json", ben_json, "Machine-readable output");

  // agreement
  auto* agr = app.add_subcommand("agreement", "Inter/intra-observer agreement study");
  std::string agr_study, agr_out;
  bool agr_json = false;
  agr->add_option("--study", agr_study, "Study manifest (.jsonl)")->required();
  agr->add_option("--out", agr_out, "Also write the table to this CSV file");
  agr->add_flag("--json", agr_json, "Machine-readable output");

  // train
  auto* tr = app.add_subcommand("train", "Train the segmentation network");
  std::string tr_config, tr_data, tr_out = "weights.vsgw", tr_loss;
  tr->add_option("--config", tr_config, "Network/optimiser config (JSON)")->required();
  tr->add_option("--data", tr_data, "Cohort manifest with images and reference masks")->required();
  tr->add_option("--out", tr_out, "Output weights file");
  tr->add_option("--loss-csv", tr_loss, "Write the per-epoch loss curve here");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the HTTP service");
  int srv_port = 0;
  std::vector<std::string> srv_weights;
  std::string srv_host = "127.0.0.1";
  std::size_t srv_workers = 1;
  srv->add_option("--port", srv_port, "Port (default $VOLSEG_PORT or 8080)");
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--weights", srv_weights, "Weights as MODALITY=path (bare path means T2)");
  srv->add_option("--workers", srv_workers, "Inference worker threads")->check(CLI::Range(1, 64));

  // phantom
  auto* ph = app.add_subcommand("phantom", "Write a small synthetic cohort for trying the tools");
  std::string ph_out;
  std::size_t ph_cases = 6;
  std::uint64_t ph_seed = 1;
  ph->add_option("--out", ph_out, "Output directory")->required();
  ph->add_option("--cases", ph_cases, "Number of cases")->check(CLI::Range(1, 1000));
  ph->add_option("--seed", ph_seed, "Random seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (seg->parsed()) {
      const auto weights = segnet::load_weights<float>(seg_weights);
      const auto img = nifti::read_nifti_file(seg_in);
      const LabelMask mask = segnet::segment_volume(img.grid, weights);
      nifti::write_mask_file(seg_out, mask);
      const double ml = volumes(SegmentationPair(mask, mask)).pred_ml;
      if (seg_json) {
        out << nlohmann::json{{"mask", seg_out}, {"modality", seg_modality}, {"voxels", mask_count(mask)}, {"ml", ml}}
                   .dump(2)
            << '\n';
      } else {
        out << "wrote " << seg_out << " (" << mask_count(mask) << " voxels, " << report::fixed(ml, 2) << " mL)\n";
      }
    } else if (met->parsed()) {
      const LabelMask pred = nifti::read_mask_file(met_pred);
      const LabelMask ref = nifti::read_mask_file(met_ref);
      const MetricsRecord r = evaluate_pair(SegmentationPair(pred, ref));
      if (met_json) {
        out << detail::metrics_json(r).dump(2) << '\n';
      } else {
        auto cell = [](const std::optional<double>& v) { return v ? report::fixed(*v, 4) : std::string("NA"); };
        out << "DSC       " << cell(r.dsc) << "\nJaccard   " << cell(r.jaccard) << "\nPrecision " << cell(r.precision)
            << "\nRecall    " << cell(r.recall) << "\nAccuracy  " << cell(r.accuracy) << "\nHD95 (mm) "
            << cell(r.hd95_mm) << "\nVolume pred (mL) " << report::fixed(r.volume_pred_ml, 3)
            << "\nVolume ref (mL)  " << report::fixed(r.volume_ref_ml, 3) << '\n';
        if (r.failure) out << "FAILED: prediction is empty\n";
      }
    } else if (coh->parsed()) {
      const auto m = cohort::load_manifest(coh_manifest);
      std::optional<segnet::Weights<float>> weights;
      cohort::Predictor predictor;
      if (!coh_weights.empty()) {
        weights = segnet::load_weights<float>(coh_weights);
        predictor = [&](const cohort::CohortCase& c) {
          return segnet::segment_volume(nifti::read_nifti_file(c.image_path).grid, *weights);
        };
      }
      const cohort::Predictor* pp = weights ? &predictor : nullptr;
      const auto ev = cohort::evaluate_cohort(m, coh_model, pp);
      const auto vol = cohort::volume_report(m, coh_model, detail::read_exclusions(coh_exclude, coh_exclude_file), pp);
      cohort::write_report(coh_report, ev, &vol);
      if (coh_json) {
        out << detail::read_text(fs::path(coh_report) / "summary.json");
      } else {
        cohort::write_summary_csv(out, ev);
        out << "report written to " << coh_report << '\n';
      }
    } else if (ben->parsed()) {
      const auto models = detail::split_list(ben_models);
      if (models.size() < 2) {
        err << "error: --models needs at least two comma-separated names\n";
        return kExitUsage;
      }
      const auto m = cohort::load_manifest(ben_manifest);
      const auto rows = cohort::benchmark(m, models);
      if (!ben_out.empty()) {
        std::ofstream f(ben_out);
        if (!f) throw IoError("cannot write " + ben_out);
        cohort::write_benchmark_csv(f, rows);
      }
      if (ben_json) out << cohort::benchmark_json(rows).dump(2) << '\n';
      else cohort::write_benchmark_csv(out, rows);
    } else if (agr->parsed()) {
      const auto summary = run_observer_study(load_study(agr_study));
      if (!agr_out.empty()) {
        std::ofstream f(agr_out);
        if (!f) throw IoError("cannot write " + agr_out);
        write_observer_csv(f, summary);
      }
      if (agr_json) out << observer_json(summary).dump(2) << '\n';
      else write_observer_csv(out, summary);
    } else if (tr->parsed()) {
      const auto config = detail::load_config(tr_config);
      const auto data = detail::load_training_data(tr_data);
      std::ostringstream curve;
      curve << "epoch,loss\n";
      segnet::TrainOptions opts;
      opts.on_epoch = [&](std::size_t epoch, double loss) {
        curve << epoch << ',' << report::exact(loss) << '\n';
      };
      const auto result = segnet::train(config, data, opts);
      segnet::save_weights(tr_out, result.weights);
      if (!tr_loss.empty()) {
        std::ofstream f(tr_loss);
        if (!f) throw IoError("cannot write " + tr_loss);
        f << curve.str();
      }
      out << "trained " << result.steps << " steps on " << data.size() << " samples, final loss "
          << report::fixed(result.epoch_loss.back(), 4) << "; weights written to " << tr_out << '\n';
    } else if (srv->parsed()) {
      int port = srv_port;
      if (port == 0) {
        const char* env = std::getenv("VOLSEG_PORT");
        port = env ? std::atoi(env) : kDefaultPort;
      }
      if (port <= 0 || port > 65535) {
        err << "error: invalid port " << port << '\n';
        return kExitUsage;
      }
      service::ServiceOptions opts;
      opts.workers = srv_workers;
      for (const auto& w : srv_weights) {
        auto [modality, path] = detail::parse_weights_arg(w);
        opts.weights.insert_or_assign(modality, segnet::load_weights<float>(path));
      }
      service::Service svc(std::move(opts));
      httplib::Server server;
      svc.mount(server);
      out << "listening on http://" << srv_host << ':' << port << std::endl;
      if (!server.listen(srv_host, port)) throw IoError("cannot listen on " + srv_host + ":" + std::to_string(port));
    } else if (ph->parsed()) {
      phantom::CohortOptions opt;
      opt.cases = ph_cases;
      opt.seed = ph_seed;
      const auto m = phantom::write_cohort(ph_out, opt);
      out << "wrote " << m.cases.size() << " cases to " << ph_out << " (cohort.jsonl, study.jsonl)\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace volseg::cli
