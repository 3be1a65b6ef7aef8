#include "hsicnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hsicnn {

namespace {

// Position (1-based) of each original class id within the split, or 0.
std::vector<int> class_position(const SplitSpec& split) {
  int max_id = 0;
  for (int c : split.classes) max_id = std::max(max_id, c);
  std::vector<int> pos(static_cast<std::size_t>(max_id) + 1, 0);
  for (std::size_t i = 0; i < split.classes.size(); ++i)
    pos[static_cast<std::size_t>(split.classes[i])] = static_cast<int>(i) + 1;
  return pos;
}

}  // namespace

double overall_accuracy(const std::vector<std::uint16_t>& pred, const LabelMap& labels,
                        const SplitSpec& split) {
  if (pred.size() != labels.labels.size())
    throw std::invalid_argument("overall_accuracy: prediction size mismatch");
  std::size_t correct = 0, total = 0;
  for (std::size_t ci = 0; ci < split.classes.size(); ++ci)
    for (std::size_t p : split.test[ci]) {
      ++total;
      if (pred[p] == ci + 1) ++correct;
    }
  if (total == 0) throw std::invalid_argument("overall_accuracy: empty test set");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

EvalReport confusion(const std::vector<std::uint16_t>& pred, const LabelMap& labels,
                     const SplitSpec& split) {
  const std::size_t c = split.classes.size();
  if (c < 2) throw std::invalid_argument("confusion: need >= 2 classes");
  EvalReport r;
  r.confusion.assign(c, std::vector<double>(c, 0.0));
  r.per_class_accuracy.assign(c, 0.0);
  r.row_defined.assign(c, false);
  r.n_test.assign(c, 0);
  std::size_t correct = 0, total = 0;
  for (std::size_t ci = 0; ci < c; ++ci) {
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t p : split.test[ci]) {
      const std::uint16_t pc = pred[p];
      if (pc >= 1 && pc <= c) ++counts[pc - 1];
      ++total;
      if (pc == ci + 1) ++correct;
    }
    r.n_test[ci] = split.test[ci].size();
    if (r.n_test[ci] == 0) continue;  // row flagged undefined
    r.row_defined[ci] = true;
    for (std::size_t cj = 0; cj < c; ++cj)
      r.confusion[ci][cj] =
          100.0 * static_cast<double>(counts[cj]) / static_cast<double>(r.n_test[ci]);
    r.per_class_accuracy[ci] = r.confusion[ci][ci];
  }
  if (total == 0) throw std::invalid_argument("confusion: empty test set");
  r.overall_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

std::vector<int> boundary_distance(const LabelMap& labels) {
  std::vector<int> cat(labels.labels.size(), -1);
  bool any = false;
  for (int y = 0; y < labels.H; ++y)
    for (int x = 0; x < labels.W; ++x) {
      const std::uint16_t own = labels.at(y, x);
      if (own == 0) continue;
      any = true;
      int dist = 2;  // >= 2 unless a closer different-class neighbor exists
      for (int r = 1; r <= 2 && dist == 2; ++r) {
        for (int dy = -r; dy <= r && dist == 2; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            if (std::max(std::abs(dy), std::abs(dx)) != r) continue;
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= labels.H || nx < 0 || nx >= labels.W) continue;
            const std::uint16_t nb = labels.at(ny, nx);
            if (nb != 0 && nb != own) {
              dist = r - 1;
              break;
            }
          }
      }
      cat[static_cast<std::size_t>(y) * labels.W + x] = dist;
    }
  if (!any) throw std::invalid_argument("boundary_distance: no labeled pixels");
  return cat;
}

BoundaryReport fp_by_category(const std::vector<std::uint16_t>& pred,
                              const LabelMap& labels, const SplitSpec& split) {
  const std::vector<int> cat = boundary_distance(labels);
  BoundaryReport r;
  for (std::size_t ci = 0; ci < split.classes.size(); ++ci)
    for (std::size_t p : split.test[ci]) {
      const int c = cat[p];
      if (c < 0) continue;
      ++r.test_counts[static_cast<std::size_t>(c)];
      if (pred[p] != ci + 1) ++r.false_positives[static_cast<std::size_t>(c)];
    }
  for (int c = 0; c < 3; ++c)
    r.percentage[static_cast<std::size_t>(c)] =
        r.test_counts[static_cast<std::size_t>(c)] == 0
            ? 0.0
            : 100.0 *
                  static_cast<double>(r.false_positives[static_cast<std::size_t>(c)]) /
                  static_cast<double>(r.test_counts[static_cast<std::size_t>(c)]);
  return r;
}

std::vector<std::array<std::uint8_t, 3>> default_palette() {
  return {
      {0, 0, 0},        // unlabeled
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
      {245, 130, 48},  {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
      {210, 245, 60},  {250, 190, 190}, {0, 128, 128},  {230, 190, 255},
      {170, 110, 40},  {255, 250, 200}, {128, 0, 0},    {170, 255, 195},
      {128, 128, 0},   {255, 215, 180}, {0, 0, 128},    {128, 128, 128},
      {255, 255, 255}, {100, 60, 30},   {60, 100, 30},  {30, 60, 100},
  };
}

void render_map(const std::vector<std::uint16_t>& map, int h, int w,
                const std::vector<std::array<std::uint8_t, 3>>& palette,
                const std::string& path) {
  if (map.size() != static_cast<std::size_t>(h) * w)
    throw std::invalid_argument("render_map: map size does not match extents");
  for (std::uint16_t v : map)
    if (v >= palette.size())
      throw std::invalid_argument("render_map: palette too small for label " +
                                  std::to_string(v));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "P6\n" << w << " " << h << "\n255\n";
  for (std::uint16_t v : map)
    os.write(reinterpret_cast<const char*>(palette[v].data()), 3);
  if (!os) throw std::runtime_error("write failed: " + path);
}

ProtocolResult run_protocol(const HSICube& cube, const LabelMap& labels,
                            const std::vector<int>& classes, int n_per_class,
                            const NetworkConfig& config, const TrainPlan& plan,
                            int n_partitions,
                            const std::function<void(int, const EvalReport&)>&
                                on_partition) {
  if (n_partitions < 1)
    throw std::invalid_argument("run_protocol: need at least one partition");
  ProtocolResult result;
  for (int i = 0; i < n_partitions; ++i) {
    const std::uint32_t seed = plan.seed + static_cast<std::uint32_t>(i);
    SplitSpec split = sample_split(labels, classes, n_per_class, seed);
    std::vector<std::size_t> train_pixels;
    for (const auto& v : split.train)
      train_pixels.insert(train_pixels.end(), v.begin(), v.end());
    HSICube standardized = cube;
    standardize(standardized, train_pixels);

    NetworkConfig cfg = config;
    cfg.n_classes = static_cast<int>(classes.size());
    ContextualNet net = build<float>(cfg, seed);
    TrainPlan p = plan;
    p.seed = seed;
    TrainLog log = train(net, make_training_set(standardized, split, p.augmentation), p);

    Tensor as_tensor({standardized.H, standardized.W, standardized.B});
    std::copy(standardized.values.begin(), standardized.values.end(), as_tensor.data());
    std::vector<std::uint16_t> pred = predict(net, as_tensor, 64);
    EvalReport report = confusion(pred, labels, split);
    if (on_partition) on_partition(i, report);
    result.reports.push_back(std::move(report));
    result.logs.push_back(std::move(log));
  }
  double sum = 0.0;
  result.best_oa = result.reports[0].overall_accuracy;
  for (const EvalReport& r : result.reports) {
    sum += r.overall_accuracy;
    result.best_oa = std::max(result.best_oa, r.overall_accuracy);
  }
  result.mean_oa = sum / n_partitions;
  double ss = 0.0;
  for (const EvalReport& r : result.reports) {
    const double d = r.overall_accuracy - result.mean_oa;
    ss += d * d;
  }
  result.std_oa = n_partitions > 1 ? std::sqrt(ss / (n_partitions - 1)) : 0.0;
  return result;
}

void write_report_csv(const EvalReport& r, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "overall_accuracy," << r.overall_accuracy << "\n";
  os << "class,n_test,accuracy";
  for (std::size_t j = 0; j < r.confusion.size(); ++j) os << ",pred_" << j + 1;
  os << "\n";
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    os << i + 1 << ',' << r.n_test[i] << ','
       << (r.row_defined[i] ? std::to_string(r.per_class_accuracy[i]) : "undefined");
    for (double v : r.confusion[i]) os << ',' << v;
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "overall accuracy: " << r.overall_accuracy << " %\n";
  os << "confusion (rows = ground truth, cols = prediction, %):\n";
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    os << "  class " << i + 1 << " (n=" << r.n_test[i] << "):";
    if (!r.row_defined[i]) {
      os << " undefined (no test pixels)\n";
      continue;
    }
    for (double v : r.confusion[i]) os << ' ' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace hsicnn
