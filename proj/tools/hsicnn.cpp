// Command-line front end: dataset conversion, training, repeated-partition
// protocols, architecture sweeps and whole-image classification.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "hsicnn/eval.hpp"
#include "hsicnn/network.hpp"
#include "hsicnn/optim.hpp"

namespace fs = std::filesystem;
using namespace hsicnn;

namespace {

// Flat key=value experiment description. Every default is the reference
// configuration; unknown keys are rejected.
struct ExperimentConfig {
  std::string cube_path;
  std::string labels_path;
  std::string classes = "all";  // "all", "largest:N" or comma-separated ids
  std::string output_dir = "run";
  int width = 128;
  int n_residual_modules = 2;
  std::vector<int> bank_scales = {1, 3, 5};
  int n_per_class = 200;
  int n_partitions = 20;
  std::uint32_t seed = 0;
  TrainPlan plan;
};

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw std::runtime_error("config: bad integer '" + item + "' in " + key);
    }
  }
  if (out.empty()) throw std::runtime_error("config: empty list for " + key);
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_longs(const std::vector<long>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& val) {
  try {
    if (key == "cube") cfg.cube_path = val;
    else if (key == "labels") cfg.labels_path = val;
    else if (key == "classes") cfg.classes = val;
    else if (key == "output_dir") cfg.output_dir = val;
    else if (key == "width") cfg.width = std::stoi(val);
    else if (key == "n_residual_modules") cfg.n_residual_modules = std::stoi(val);
    else if (key == "bank_scales") cfg.bank_scales = parse_int_list(val, key);
    else if (key == "n_per_class") cfg.n_per_class = std::stoi(val);
    else if (key == "n_partitions") cfg.n_partitions = std::stoi(val);
    else if (key == "seed") cfg.seed = static_cast<std::uint32_t>(std::stoul(val));
    else if (key == "base_lr") cfg.plan.base_lr = std::stod(val);
    else if (key == "gamma") cfg.plan.gamma = std::stod(val);
    else if (key == "step_iters") {
      cfg.plan.step_iters.clear();
      for (int v : parse_int_list(val, key)) cfg.plan.step_iters.push_back(v);
    } else if (key == "momentum") cfg.plan.momentum = std::stod(val);
    else if (key == "weight_decay") cfg.plan.weight_decay = std::stod(val);
    else if (key == "batch_size") cfg.plan.batch_size = std::stoi(val);
    else if (key == "max_iters") cfg.plan.max_iters = std::stol(val);
    else if (key == "augmentation") cfg.plan.augmentation = (val == "1" || val == "true");
    else if (key == "snapshot_every") cfg.plan.snapshot_every = std::stol(val);
    else if (key == "log_every") cfg.plan.log_every = std::stol(val);
    else throw std::runtime_error("config: unknown key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("config: bad value '" + val + "' for " + key);
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

// The effective (defaults merged) config; re-running from this file
// reproduces the run.
void echo_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  os << "cube = " << cfg.cube_path << "\n"
     << "labels = " << cfg.labels_path << "\n"
     << "classes = " << cfg.classes << "\n"
     << "output_dir = " << cfg.output_dir << "\n"
     << "width = " << cfg.width << "\n"
     << "n_residual_modules = " << cfg.n_residual_modules << "\n"
     << "bank_scales = " << join_ints(cfg.bank_scales) << "\n"
     << "n_per_class = " << cfg.n_per_class << "\n"
     << "n_partitions = " << cfg.n_partitions << "\n"
     << "seed = " << cfg.seed << "\n"
     << "base_lr = " << cfg.plan.base_lr << "\n"
     << "gamma = " << cfg.plan.gamma << "\n"
     << "step_iters = " << join_longs(cfg.plan.step_iters) << "\n"
     << "momentum = " << cfg.plan.momentum << "\n"
     << "weight_decay = " << cfg.plan.weight_decay << "\n"
     << "batch_size = " << cfg.plan.batch_size << "\n"
     << "max_iters = " << cfg.plan.max_iters << "\n"
     << "augmentation = " << (cfg.plan.augmentation ? 1 : 0) << "\n"
     << "snapshot_every = " << cfg.plan.snapshot_every << "\n"
     << "log_every = " << cfg.plan.log_every << "\n";
}

std::vector<int> resolve_classes(const ExperimentConfig& cfg, const LabelMap& labels) {
  if (cfg.classes == "all") {
    std::vector<int> all(labels.C);
    for (int i = 0; i < labels.C; ++i) all[i] = i + 1;
    return all;
  }
  if (cfg.classes.rfind("largest:", 0) == 0)
    return largest_classes(labels, std::stoi(cfg.classes.substr(8)));
  return parse_int_list(cfg.classes, "classes");
}

// Artifacts registered here are deleted if the command throws, so a failed
// run never leaves partial outputs behind.
struct ArtifactGuard {
  std::vector<std::string> paths;
  bool committed = false;
  void track(const std::string& p) { paths.push_back(p); }
  ~ArtifactGuard() {
    if (committed) return;
    for (const auto& p : paths) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

struct LoadedExperiment {
  HSICube cube;
  LabelMap labels;
  std::vector<int> classes;
  NetworkConfig net_cfg;
};

LoadedExperiment load_experiment(const ExperimentConfig& cfg) {
  if (cfg.cube_path.empty() || cfg.labels_path.empty())
    throw std::runtime_error("config: cube and labels paths are required");
  LoadedExperiment e;
  e.cube = read_hsic(cfg.cube_path);
  e.labels = read_hsil(cfg.labels_path);
  if (e.cube.H != e.labels.H || e.cube.W != e.labels.W)
    throw std::runtime_error("cube and label extents disagree");
  e.classes = resolve_classes(cfg, e.labels);
  e.net_cfg.bands = e.cube.B;
  e.net_cfg.n_classes = static_cast<int>(e.classes.size());
  e.net_cfg.width = cfg.width;
  e.net_cfg.n_residual_modules = cfg.n_residual_modules;
  e.net_cfg.bank_scales = cfg.bank_scales;
  e.net_cfg.validate();
  return e;
}

void apply_fast_profile(TrainPlan& plan) {
  plan.max_iters = 10000;
  plan.step_iters = {3333, 6666};
}

int cmd_convert(const std::string& header, const std::string& raw,
                const std::string& out, bool as_labels) {
  ArtifactGuard guard;
  guard.track(out);
  if (as_labels) {
    LabelMap m = read_envi_labels(header, raw);
    write_hsil(m, out);
    std::cout << "H=" << m.H << " W=" << m.W << " C=" << m.C << "\n";
  } else {
    HSICube cube = read_envi_cube(header, raw);
    write_hsic(cube, out);
    std::cout << "H=" << cube.H << " W=" << cube.W << " B=" << cube.B << "\n";
  }
  guard.committed = true;
  return 0;
}

Tensor cube_tensor(const HSICube& cube) {
  Tensor t({cube.H, cube.W, cube.B});
  std::copy(cube.values.begin(), cube.values.end(), t.data());
  return t;
}

int cmd_train(ExperimentConfig cfg) {
  LoadedExperiment e = load_experiment(cfg);
  fs::create_directories(cfg.output_dir);
  echo_config(cfg, (fs::path(cfg.output_dir) / "config.effective").string());

  SplitSpec split = sample_split(e.labels, e.classes, cfg.n_per_class, cfg.seed);
  std::vector<std::size_t> train_pixels;
  for (const auto& v : split.train)
    train_pixels.insert(train_pixels.end(), v.begin(), v.end());
  standardize(e.cube, train_pixels);

  ContextualNet net = build<float>(e.net_cfg, cfg.seed);
  TrainPlan plan = cfg.plan;
  plan.seed = cfg.seed;
  TrainLog log = train(net, make_training_set(e.cube, split, plan.augmentation), plan);

  auto pred = predict(net, cube_tensor(e.cube), 64);
  EvalReport report = confusion(pred, e.labels, split);

  ArtifactGuard guard;
  const fs::path dir(cfg.output_dir);
  const std::string weights = (dir / "weights.hsiw").string();
  const std::string log_csv = (dir / "train_log.csv").string();
  const std::string report_csv = (dir / "report.csv").string();
  guard.track(weights);
  guard.track(log_csv);
  guard.track(report_csv);
  save_weights(net, weights);
  log.write_csv(log_csv);
  write_report_csv(report, report_csv);
  guard.committed = true;

  std::cout << format_report(report);
  std::cout << "OA " << report.overall_accuracy << "\n";
  return 0;
}

int cmd_protocol(ExperimentConfig cfg, int partitions_override) {
  if (partitions_override > 0) cfg.n_partitions = partitions_override;
  LoadedExperiment e = load_experiment(cfg);
  fs::create_directories(cfg.output_dir);
  echo_config(cfg, (fs::path(cfg.output_dir) / "config.effective").string());

  TrainPlan plan = cfg.plan;
  plan.seed = cfg.seed;
  ProtocolResult res = run_protocol(
      e.cube, e.labels, e.classes, cfg.n_per_class, e.net_cfg, plan, cfg.n_partitions,
      [](int i, const EvalReport& r) {
        std::cout << "partition " << i << ": OA " << r.overall_accuracy << "\n";
      });

  ArtifactGuard guard;
  const fs::path dir(cfg.output_dir);
  for (std::size_t i = 0; i < res.reports.size(); ++i) {
    const std::string p = (dir / ("partition_" + std::to_string(i) + ".csv")).string();
    guard.track(p);
    write_report_csv(res.reports[i], p);
  }
  const std::string agg = (dir / "aggregate.txt").string();
  guard.track(agg);
  char line[128];
  std::snprintf(line, sizeof line, "%.2f ± %.2f (%.2f)\n", res.mean_oa, res.std_oa,
                res.best_oa);
  std::ofstream(agg, std::ios::trunc) << line;
  guard.committed = true;

  std::cout << line;
  return 0;
}

int cmd_sweep(ExperimentConfig cfg, const std::string& axis,
              const std::vector<int>& values) {
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  echo_config(cfg, (dir / "config.effective").string());

  struct Row {
    int value;
    double mean, stddev, best, seconds;
  };
  std::vector<Row> rows;
  for (int v : values) {
    ExperimentConfig run_cfg = cfg;
    if (axis == "width") run_cfg.width = v;
    else if (axis == "depth") run_cfg.n_residual_modules = v;
    else if (axis == "bank") {
      run_cfg.bank_scales.clear();
      for (int s = 1; s <= v; s += 2) run_cfg.bank_scales.push_back(s);
    } else
      throw std::runtime_error("sweep: axis must be width, depth or bank");

    LoadedExperiment e = load_experiment(run_cfg);
    TrainPlan plan = run_cfg.plan;
    plan.seed = run_cfg.seed;
    const auto t0 = std::chrono::steady_clock::now();
    ProtocolResult res = run_protocol(e.cube, e.labels, e.classes, run_cfg.n_per_class,
                                      e.net_cfg, plan, run_cfg.n_partitions);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back({v, res.mean_oa, res.std_oa, res.best_oa, secs});
    std::cout << axis << "=" << v << ": " << res.mean_oa << " ± " << res.std_oa
              << " (" << res.best_oa << "), " << secs << " s\n";
  }

  ArtifactGuard guard;
  const std::string table = (dir / "sweep.csv").string();
  guard.track(table);
  std::ofstream os(table, std::ios::trunc);
  os << axis << ",mean_oa,std_oa,best_oa,train_seconds\n";
  for (const Row& r : rows)
    os << r.value << ',' << r.mean << ',' << r.stddev << ',' << r.best << ','
       << r.seconds << "\n";
  guard.committed = true;
  return 0;
}

int cmd_classify(const std::string& weights_path, const std::string& cube_path,
                 const std::string& out_map, const std::string& out_ppm) {
  ContextualNet net = load_weights(weights_path);
  HSICube cube = read_hsic(cube_path);
  if (cube.B != net.cfg.bands)
    throw std::runtime_error("band mismatch: weights expect B=" +
                             std::to_string(net.cfg.bands) + ", cube has B=" +
                             std::to_string(cube.B));

  auto pred = predict(net, cube_tensor(cube), 64);

  ArtifactGuard guard;
  guard.track(out_map);
  guard.track(out_ppm);
  LabelMap map;
  map.H = cube.H;
  map.W = cube.W;
  map.C = net.cfg.n_classes;
  map.labels = pred;
  write_hsil(map, out_map);
  render_map(pred, cube.H, cube.W, default_palette(), out_ppm);
  guard.committed = true;

  std::cout << "H=" << cube.H << " W=" << cube.W << " classes=" << net.cfg.n_classes
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual CNN for hyperspectral image classification"};
  app.require_subcommand(1);

  std::string envi_header, envi_raw, out_path;
  bool as_labels = false;
  auto* convert = app.add_subcommand("convert", "ENVI raster to HSIC/HSIL");
  convert->add_option("--envi-header", envi_header)->required();
  convert->add_option("--envi-raw", envi_raw)->required();
  convert->add_option("--out", out_path)->required();
  convert->add_flag("--labels", as_labels, "treat the raster as a label map");

  std::string config_path;
  bool fast = false;
  long max_iters_override = -1;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path)->required();
    cmd->add_flag("--fast", fast, "10K-iteration profile with scaled lr steps");
    cmd->add_option("--max-iters", max_iters_override);
  };

  auto* train_cmd = app.add_subcommand("train", "single split, train and evaluate");
  add_common(train_cmd);

  int partitions_override = -1;
  auto* protocol = app.add_subcommand("protocol", "repeated-partition experiment");
  add_common(protocol);
  protocol->add_option("--partitions", partitions_override);

  std::string axis;
  std::string sweep_values;
  auto* sweep = app.add_subcommand("sweep", "architecture sweep over one axis");
  add_common(sweep);
  sweep->add_option("--axis", axis)->required()->check(
      CLI::IsMember({"width", "depth", "bank"}));
  sweep->add_option("--values", sweep_values)->required();

  std::string weights_path, cube_path, out_map, out_ppm;
  auto* classify = app.add_subcommand("classify", "label map from trained weights");
  classify->add_option("--weights", weights_path)->required();
  classify->add_option("--cube", cube_path)->required();
  classify->add_option("--out-map", out_map)->required();
  classify->add_option("--out-ppm", out_ppm)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (convert->parsed()) return cmd_convert(envi_header, envi_raw, out_path, as_labels);

    if (classify->parsed()) return cmd_classify(weights_path, cube_path, out_map, out_ppm);

    ExperimentConfig cfg = load_config(config_path);
    if (fast) apply_fast_profile(cfg.plan);
    if (max_iters_override >= 0) {
      cfg.plan.max_iters = max_iters_override;
      std::erase_if(cfg.plan.step_iters,
                    [&](long s) { return s >= cfg.plan.max_iters; });
    }
    cfg.plan.validate();

    if (train_cmd->parsed()) return cmd_train(cfg);
    if (protocol->parsed()) return cmd_protocol(cfg, partitions_override);
    return cmd_sweep(cfg, axis, parse_int_list(sweep_values, "--values"));
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
}
