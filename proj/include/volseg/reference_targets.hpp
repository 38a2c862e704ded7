#pragma once

// Published reference numbers for the pediatric pancreas cohort, used only to
// compare an integration run on the released data against expectations.
// Nothing in the test suite gates on these.

#include <array>
#include <string_view>

namespace volseg::reference {

struct MeanSdTarget {
  double mean;
  double sd;
};

struct SummaryTarget {
  std::string_view group;
  MeanSdTarget dsc, precision, accuracy, jaccard, recall, hd95;
};

inline constexpr std::array<SummaryTarget, 4> kSummary = {{
    {"ALL", {0.85, 0.16}, {0.92, 0.12}, {0.99, 0.0}, {0.77, 0.20}, {0.82, 0.19}, {7.94, 17}},
    {"Chronic Pancreatitis", {0.80, 0.20}, {0.90, 0.16}, {0.99, 0.0}, {0.72, 0.23}, {0.80, 0.22}, {15.67, 26}},
    {"Acute Pancreatitis", {0.81, 0.19}, {0.93, 0.11}, {0.99, 0.0}, {0.71, 0.2}, {0.76, 0.23}, {9.85, 19.7}},
    {"Normal", {0.88, 0.1}, {0.92, 0.11}, {0.99, 0.00}, {0.81, 0.16}, {0.87, 0.15}, {3.98, 7.35}},
}};

struct BenchmarkTarget {
  std::string_view model;
  MeanSdTarget dsc, jaccard, hd95;
};

// First row is the linear-attention model this toolkit mirrors.
inline constexpr std::array<BenchmarkTarget, 5> kBenchmark = {{
    {"reference", {0.85, 0.16}, {0.77, 0.20}, {7.94, 17}},
    {"nnUNet2d", {0.70, 0.20}, {0.56, 0.22}, {10.14, 16.11}},
    {"nnUNet3d", {0.79, 0.18}, {0.68, 0.21}, {7.25, 14.24}},
    {"TransUnet", {0.78, 0.12}, {0.69, 0.05}, {8.01, 4.89}},
    {"SynergyNet", {0.80, 1.02}, {0.70, 1.1}, {7.99, 4.32}},
}};

struct ObserverTarget {
  std::string_view evaluations;
  std::string_view group;
  MeanSdTarget dsc, precision, jaccard, recall, hd95;
};

inline constexpr std::array<ObserverTarget, 4> kObserver = {{
    {"Inter-observer", "Pancreatitis", {0.82, 0.17}, {0.82, 0.19}, {0.77, 0.20}, {0.83, 0.20}, {7.89, 16.40}},
    {"Intra-observer", "Pancreatitis", {0.81, 0.20}, {0.93, 0.11}, {0.73, 0.24}, {0.77, 0.24}, {12.07, 23.01}},
    {"Inter-observer", "Healthy", {0.86, 0.13}, {0.83, 0.18}, {0.81, 0.16}, {0.87, 0.16}, {3.94, 6.53}},
    {"Intra-observer", "Healthy", {0.88, 0.11}, {0.93, 0.11}, {0.79, 0.16}, {0.84, 0.14}, {3.26, 5.40}},
}};

struct KappaTarget {
  double pancreatitis;
  double healthy;
};

inline constexpr KappaTarget kInterKappa{0.82, 0.88};

// Intra-observer kappa is reported twice with different values (summary vs
// results section). Both are kept and neither is preferred.
inline constexpr KappaTarget kIntraKappaSummary{0.88, 0.81};
inline constexpr KappaTarget kIntraKappaResults{0.81, 0.85};

inline constexpr double kVolumeR2Normal = 0.85;
inline constexpr double kVolumeR2Diseased = 0.77;

}  // namespace volseg::reference
