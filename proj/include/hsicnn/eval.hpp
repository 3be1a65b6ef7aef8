#pragma once

// Evaluation protocol: overall accuracy, row-normalized confusion matrices,
// boundary-distance false-positive categorization, classification-map
// rendering and the repeated-partition experiment driver.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hsicnn/data.hpp"
#include "hsicnn/network.hpp"
#include "hsicnn/optim.hpp"

namespace hsicnn {

struct EvalReport {
  double overall_accuracy = 0.0;           // percent
  std::vector<double> per_class_accuracy;  // percent, diagonal of confusion
  std::vector<std::vector<double>> confusion;  // row-normalized percent
  std::vector<bool> row_defined;               // false when a class has no test pixels
  std::vector<std::size_t> n_test;             // test pixels per class
};

// 100 * correct / total over test pixels only. `pred` holds 1-based class
// positions (indices into split.classes + 1), as produced by predict().
double overall_accuracy(const std::vector<std::uint16_t>& pred, const LabelMap& labels,
                        const SplitSpec& split);

EvalReport confusion(const std::vector<std::uint16_t>& pred, const LabelMap& labels,
                     const SplitSpec& split);

// Chebyshev distance from each labeled pixel to the nearest labeled pixel of
// a different class, capped at 2 (so 2 means the whole 5x5 neighborhood is
// single-class where labeled). Unlabeled pixels are ignored as subjects and
// as neighbors and get distance -1.
std::vector<int> boundary_distance(const LabelMap& labels);

struct BoundaryReport {
  // Indexed by category 0, 1, >=2.
  std::array<std::size_t, 3> false_positives{};
  std::array<std::size_t, 3> test_counts{};
  std::array<double, 3> percentage{};  // FP / test within the category
};

BoundaryReport fp_by_category(const std::vector<std::uint16_t>& pred,
                              const LabelMap& labels, const SplitSpec& split);

// Fixed palette for classification maps; entry 0 is the unlabeled black.
std::vector<std::array<std::uint8_t, 3>> default_palette();

// Binary PPM (P6, maxval 255), one palette entry per class id.
void render_map(const std::vector<std::uint16_t>& map, int h, int w,
                const std::vector<std::array<std::uint8_t, 3>>& palette,
                const std::string& path);

struct ProtocolResult {
  double mean_oa = 0.0;
  double std_oa = 0.0;  // sample (n-1) standard deviation
  double best_oa = 0.0;
  std::vector<EvalReport> reports;  // one per partition
  std::vector<TrainLog> logs;
};

// One partition seeded `base_seed + i` per run i: split -> standardize ->
// train -> predict -> report. `classes` selects the evaluated label ids.
ProtocolResult run_protocol(const HSICube& cube, const LabelMap& labels,
                            const std::vector<int>& classes, int n_per_class,
                            const NetworkConfig& config, const TrainPlan& plan,
                            int n_partitions,
                            const std::function<void(int, const EvalReport&)>&
                                on_partition = nullptr);

void write_report_csv(const EvalReport& r, const std::string& path);
std::string format_report(const EvalReport& r);

}  // namespace hsicnn
