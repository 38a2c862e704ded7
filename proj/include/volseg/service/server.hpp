#pragma once

// JSON-over-HTTP service: volume/mask stores, asynchronous segmentation jobs
// and slice rendering for the viewer.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "volseg/error.hpp"
#include "volseg/niftio.hpp"
#include "volseg/segmetrics.hpp"
#include "volseg/segnet.hpp"
#include "volseg/service/jobs.hpp"
#include "volseg/service/png.hpp"
#include "volseg/service/slices.hpp"
#include "volseg/volcore.hpp"

namespace volseg::service {

struct ServiceOptions {
  std::map<std::string, segnet::Weights<float>> weights;  // keyed by modality: "T1", "T2"
  std::size_t workers = 1;
  std::size_t queue_capacity = 64;
};

inline bool known_modality(const std::string& m) { return m == "T1" || m == "T2"; }

/// Thread-safe id -> immutable value map.
template <typename V>
class Store {
 public:
  explicit Store(std::string prefix) : prefix_(std::move(prefix)) {}

  std::string reserve() { return prefix_ + "-" + std::to_string(++next_); }

  std::string add(V value) {
    const std::string id = reserve();
    put(id, std::move(value));
    return id;
  }

  void put(const std::string& id, V value) {
    std::unique_lock lock(mu_);
    items_[id] = std::make_shared<const V>(std::move(value));
  }

  std::shared_ptr<const V> get(const std::string& id) const {
    std::shared_lock lock(mu_);
    const auto it = items_.find(id);
    return it == items_.end() ? nullptr : it->second;
  }

 private:
  std::string prefix_;
  std::atomic<std::uint64_t> next_{0};
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const V>> items_;
};

class Service {
 public:
  explicit Service(ServiceOptions opts)
      : weights_(std::move(opts.weights)), jobs_(opts.workers, opts.queue_capacity) {}

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::string add_volume(VoxelGrid grid) { return volumes_.add(std::move(grid)); }
  std::string add_mask(LabelMask mask) { return masks_.add(std::move(mask)); }
  std::shared_ptr<const VoxelGrid> volume(const std::string& id) const { return volumes_.get(id); }
  std::shared_ptr<const LabelMask> mask(const std::string& id) const { return masks_.get(id); }
  JobQueue& jobs() noexcept { return jobs_; }

  /// Queues segmentation of a stored volume. The mask id is reserved up front
  /// and becomes readable once the job is done.
  JobRecord submit_segment(const std::string& volume_id, const std::string& modality) {
    const auto vol = volumes_.get(volume_id);
    if (!vol) throw NotFound("unknown volume '" + volume_id + "'");
    if (!known_modality(modality)) throw InvalidArgument("unknown modality '" + modality + "' (expected T1 or T2)");
    const auto w = weights_.find(modality);
    if (w == weights_.end()) throw InvalidArgument("no weights loaded for modality '" + modality + "'");
    const std::string mask_id = masks_.reserve();
    const segnet::Weights<float>* weights = &w->second;
    std::lock_guard lock(pending_mu_);
    JobRecord rec = jobs_.submit(JobKind::kSegment,
                                 {{"volume_id", volume_id}, {"modality", modality}, {"mask_id", mask_id}},
                                 [this, vol, weights, mask_id]() -> nlohmann::json {
                                   LabelMask m = segnet::segment_volume(*vol, *weights);
                                   const double ml = volumes(SegmentationPair(m, m)).pred_ml;
                                   const std::size_t n = mask_count(m);
                                   masks_.put(mask_id, std::move(m));
                                   return {{"mask_id", mask_id}, {"ml", ml}, {"voxels", n}};
                                 });
    pending_masks_[mask_id] = rec.job_id;
    return rec;
  }

  /// Registers all routes on `srv`.
  void mount(httplib::Server& srv) {
    srv.set_payload_max_length(std::size_t{1} << 31);
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json mods = nlohmann::json::array();
      for (const auto& [m, w] : weights_) mods.push_back(m);
      json(res, {{"status", "ok"}, {"modalities", mods}});
    });

    srv.Post("/volumes", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        nifti::Image img = nifti::read_nifti(as_bytes(req.body));
        const Geometry g = img.grid.geometry();
        const std::string id = add_volume(std::move(img.grid));
        res.status = 201;
        json(res, {{"volume_id", id}, {"dims", g.dims()}, {"spacing", g.spacing()}});
      });
    });

    srv.Get(R"(/volumes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto vol = require_volume(req.matches[1]);
        const Window w = default_window(*vol);
        json(res, {{"volume_id", req.matches[1].str()},
                   {"dims", vol->dims()},
                   {"spacing", vol->geometry().spacing()},
                   {"window", {w.lo, w.hi}}});
      });
    });

    srv.Get(R"(/volumes/([^/]+)/slices/([^/]+)/(-?\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto vol = require_volume(req.matches[1]);
        const int axis = parse_axis(req.matches[2]);
        const long long index = std::stoll(req.matches[3]);
        std::shared_ptr<const LabelMask> overlay;
        if (req.has_param("overlay")) overlay = require_mask(req.get_param_value("overlay"));
        Window w = default_window(*vol);
        if (req.has_param("lo")) w.lo = parse_number(req.get_param_value("lo"), "lo");
        if (req.has_param("hi")) w.hi = parse_number(req.get_param_value("hi"), "hi");
        const SliceImage img = render_slice(*vol, axis, index, w, overlay.get());
        const auto png = encode_png(img.pixels, static_cast<std::uint32_t>(img.width),
                                    static_cast<std::uint32_t>(img.height), img.channels);
        res.set_header("X-Slice-Width", std::to_string(img.width));
        res.set_header("X-Slice-Height", std::to_string(img.height));
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      });
    });

    srv.Post("/segment", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw InvalidArgument(std::string("request body is not JSON: ") + e.what());
        }
        if (!body.is_object() || !body.contains("volume_id") || !body["volume_id"].is_string()) {
          throw InvalidArgument("body needs a string 'volume_id'");
        }
        const std::string modality = body.value("modality", std::string("T2"));
        const JobRecord rec = submit_segment(body["volume_id"].get<std::string>(), modality);
        res.status = 202;
        json(res, rec.to_json());
      });
    });

    srv.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto rec = jobs_.get(req.matches[1]);
        if (!rec) throw NotFound("unknown job '" + req.matches[1].str() + "'");
        json(res, rec->to_json());
      });
    });

    srv.Post("/masks", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        nifti::Image img = nifti::read_nifti(as_bytes(req.body));
        LabelMask m = LabelMask::from_grid(img.grid);
        if (req.has_param("volume_id")) {
          const auto vol = require_volume(req.get_param_value("volume_id"));
          require_same_lattice(vol->geometry(), m.geometry(), "mask vs volume");
        }
        const auto dims = m.dims();
        const std::string id = add_mask(std::move(m));
        res.status = 201;
        json(res, {{"mask_id", id}, {"dims", dims}});
      });
    });

    srv.Get(R"(/masks/([^/]+)/volume-ml)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto m = require_mask(req.matches[1]);
        json(res, {{"mask_id", req.matches[1].str()},
                   {"ml", volumes(SegmentationPair(*m, *m)).pred_ml},
                   {"voxels", mask_count(*m)}});
      });
    });

    srv.Get(R"(/masks/([^/]+)/download)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto m = require_mask(req.matches[1]);
        const auto bytes = nifti::write_mask(*m, true);
        res.set_header("Content-Disposition", "attachment; filename=\"" + req.matches[1].str() + ".nii.gz\"");
        res.set_content(std::string(bytes.begin(), bytes.end()), "application/gzip");
      });
    });

    srv.Post("/metrics", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw InvalidArgument(std::string("request body is not JSON: ") + e.what());
        }
        const auto pred = require_mask(body.value("pred", std::string()));
        const auto ref = require_mask(body.value("ref", std::string()));
        json(res, metrics_json(evaluate_pair(SegmentationPair(*pred, *ref))));
      });
    });
  }

  static nlohmann::json metrics_json(const MetricsRecord& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"dsc", opt(r.dsc)},
            {"jaccard", opt(r.jaccard)},
            {"precision", opt(r.precision)},
            {"recall", opt(r.recall)},
            {"accuracy", opt(r.accuracy)},
            {"hd95_mm", opt(r.hd95_mm)},
            {"volume_pred_ml", r.volume_pred_ml},
            {"volume_ref_ml", r.volume_ref_ml},
            {"volume_error_ml", r.volume_error_ml},
            {"failure", r.failure},
            {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}}};
  }

 private:
  struct NotFound : Error {
    explicit NotFound(const std::string& d) : Error(ErrorKind::kInvalidArgument, d) {}
  };
  struct NotReady : Error {
    explicit NotReady(const std::string& d) : Error(ErrorKind::kInvalidArgument, d) {}
  };

  static std::span<const std::uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
  }

  static double parse_number(const std::string& s, const char* name) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument(std::string("query parameter '") + name + "' is not a number");
  }

  static void json(httplib::Response& res, const nlohmann::json& j) { res.set_content(j.dump(), "application/json"); }

  static void error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    res.status = status;
    json(res, {{"error", kind}, {"message", message}});
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const NotFound& e) {
      error(res, 404, "NotFound", e.detail());
    } catch (const NotReady& e) {
      error(res, 409, "NotReady", e.detail());
    } catch (const QueueFull& e) {
      error(res, 503, "QueueFull", e.detail());
    } catch (const Error& e) {
      error(res, 400, std::string(error_kind_name(e.kind())), e.what());
    } catch (const std::exception& e) {
      error(res, 500, "Internal", e.what());
    }
  }

  std::shared_ptr<const VoxelGrid> require_volume(const std::string& id) const {
    auto v = volumes_.get(id);
    if (!v) throw NotFound("unknown volume '" + id + "'");
    return v;
  }

  std::shared_ptr<const LabelMask> require_mask(const std::string& id) const {
    if (auto m = masks_.get(id)) return m;
    std::string job;
    {
      std::lock_guard lock(pending_mu_);
      const auto it = pending_masks_.find(id);
      if (it != pending_masks_.end()) job = it->second;
    }
    if (!job.empty()) {
      const auto rec = jobs_.get(job);
      if (rec && rec->state == JobState::kError) {
        throw NotReady("mask '" + id + "' was not produced: job " + job + " failed: " + rec->error);
      }
      // The job may have finished between the two lookups.
      if (auto m = masks_.get(id)) return m;
      throw NotReady("mask '" + id + "' is not ready: job " + job + " is " +
                     (rec ? job_state_name(rec->state) : "unknown"));
    }
    throw NotFound("unknown mask '" + id + "'");
  }

  std::map<std::string, segnet::Weights<float>> weights_;
  Store<VoxelGrid> volumes_{"vol"};
  Store<LabelMask> masks_{"mask"};
  mutable std::mutex pending_mu_;
  std::map<std::string, std::string> pending_masks_;  // reserved mask id -> job id
  JobQueue jobs_;  // declared last so workers stop before the stores go away
};

}  // namespace volseg::service
