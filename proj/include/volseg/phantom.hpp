#pragma once

// Synthetic cohorts on disk for demos and end-to-end tests: ellipsoid
// "organs" with perturbed predictions and a second rater.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "volseg/cohort.hpp"
#include "volseg/groups.hpp"
#include "volseg/niftio.hpp"
#include "volseg/volcore.hpp"

namespace volseg::phantom {

namespace fs = std::filesystem;

struct CohortOptions {
  std::size_t cases = 6;
  Dims dims{24, 24, 16};
  Spacing spacing{1.5, 1.5, 3.0};
  std::uint64_t seed = 1;
};

/// Foreground where ((p - c) / r)^2 sums to at most 1 (voxel units).
inline LabelMask ellipsoid(const Geometry& g, const std::array<double, 3>& c, const std::array<double, 3>& r) {
  std::vector<std::uint8_t> v(g.size());
  const auto& d = g.dims();
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      for (std::size_t x = 0; x < d[0]; ++x) {
        const double a = (static_cast<double>(x) - c[0]) / r[0];
        const double b = (static_cast<double>(y) - c[1]) / r[1];
        const double e = (static_cast<double>(z) - c[2]) / r[2];
        v[g.linear(x, y, z)] = a * a + b * b + e * e <= 1.0 ? 1 : 0;
      }
    }
  }
  return LabelMask(g, std::move(v));
}

/// Writes images, reference masks, predictions for models "shifted" and
/// "shrunk", a second-rater mask, cohort.jsonl and study.jsonl into `dir`.
/// Groups cycle Normal, AcutePancreatitis, ChronicPancreatitis.
inline cohort::CohortManifest write_cohort(const fs::path& dir, const CohortOptions& opt = {}) {
  fs::create_directories(dir);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> jitter(-1.5, 1.5);
  std::normal_distribution<double> noise(0.0, 0.15);
  const Geometry g(opt.dims, opt.spacing);
  const std::array<double, 3> mid{(opt.dims[0] - 1) / 2.0, (opt.dims[1] - 1) / 2.0, (opt.dims[2] - 1) / 2.0};

  cohort::CohortManifest m;
  m.source = dir / "cohort.jsonl";
  std::ofstream study(dir / "study.jsonl");
  study << nlohmann::json{{"format", "volseg-study"}, {"version", 1}, {"mode", "inter"}}.dump() << '\n';

  for (std::size_t i = 0; i < opt.cases; ++i) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "case%03zu", i + 1);
    const std::string id = idbuf;
    const Group group = kAllGroups[i % kAllGroups.size()];
    const std::array<double, 3> c{mid[0] + jitter(rng), mid[1] + jitter(rng), mid[2] + jitter(rng) / 2};
    const std::array<double, 3> r{6.0 + jitter(rng), 4.5 + jitter(rng) / 2, 3.0 + jitter(rng) / 3};
    const LabelMask ref = ellipsoid(g, c, r);
    const LabelMask shifted = ellipsoid(g, {c[0] + 1.0, c[1], c[2]}, r);
    const LabelMask shrunk = ellipsoid(g, c, {r[0] - 1.0, r[1] - 0.5, r[2]});
    const LabelMask rater_b = ellipsoid(g, {c[0], c[1] + 0.5, c[2]}, {r[0] + 0.5, r[1], r[2]});

    std::vector<double> img(g.size());
    for (std::size_t k = 0; k < img.size(); ++k) img[k] = 100.0 * (ref[k] ? 1.0 : 0.3) + 20.0 * noise(rng);

    const fs::path image = dir / (id + "_t2.nii.gz");
    nifti::write_nifti_file(image, VoxelGrid(g, std::move(img)), {nifti::Datatype::kFloat32, true});
    nifti::write_mask_file(dir / (id + "_ref.nii"), ref);
    nifti::write_mask_file(dir / (id + "_shifted.nii"), shifted);
    nifti::write_mask_file(dir / (id + "_shrunk.nii"), shrunk);
    nifti::write_mask_file(dir / (id + "_raterb.nii"), rater_b);

    cohort::CohortCase cc;
    cc.case_id = id;
    cc.group = group;
    cc.sex = i % 2 ? 'M' : 'F';
    cc.age_years = 8.0 + static_cast<double>(i);
    cc.field_strength = i % 2 ? 3.0 : 1.5;
    cc.image_path = image;
    cc.reference_path = dir / (id + "_ref.nii");
    cc.prediction_paths["shifted"] = dir / (id + "_shifted.nii");
    cc.prediction_paths["shrunk"] = dir / (id + "_shrunk.nii");
    m.cases.push_back(cc);

    study << nlohmann::json{{"case_id", id},
                            {"group", group_name(group)},
                            {"mask_a", id + "_ref.nii"},
                            {"mask_b", id + "_raterb.nii"},
                            {"reader_a", "R1"},
                            {"reader_b", "R2"}}
                 .dump()
          << '\n';
  }
  cohort::save_manifest(m, m.source);
  return m;
}

}  // namespace volseg::phantom
