#include "oebench/expcli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace oebench::expcli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// frozen generation constants for the synthetic benchmark
constexpr std::size_t kMsTrainNominal = 512;
constexpr std::size_t kMsTestPerClass = 128;
constexpr std::size_t kMsOePool = 512;
constexpr std::uint64_t kMsSeedTrainNominal = 1001;
constexpr std::uint64_t kMsSeedTestNominal = 1002;
constexpr std::uint64_t kMsSeedTestCoarse = 1003;
constexpr std::uint64_t kMsSeedTestFine = 1004;
constexpr std::uint64_t kMsSeedOePool = 1005;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': bad number '" + value + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != std::floor(v))
    throw ConfigError("config field '" + key + "': expected integer, got '" +
                      value + "'");
  return static_cast<long long>(v);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  config.classes.clear();
  config.seeds.clear();
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "dataset") config.dataset = value;
    else if (key == "oe_dataset") config.oe_dataset = value;
    else if (key == "method") config.method = value;
    else if (key == "radial") config.radial = value;
    else if (key == "gamma") config.gamma = parse_double(key, value);
    else if (key == "alpha") config.alpha = parse_double(key, value);
    else if (key == "eta") config.eta = parse_double(key, value);
    else if (key == "sweep_axis") config.sweep_axis = value;
    else if (key == "axis_value")
      config.axis_values.push_back(parse_double(key, value));
    else if (key == "class")
      config.classes.push_back(static_cast<int>(parse_int(key, value)));
    else if (key == "seed")
      config.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, value)));
    else if (key == "profile") config.profile = value;
    else if (key == "oe_size")
      config.oe_size = value == "all"
                           ? data::OeSpec::kAll
                           : static_cast<std::size_t>(parse_int(key, value));
    else if (key == "diversity_k")
      config.diversity_k = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "blur_sigma") config.blur_sigma = parse_double(key, value);
    else if (key == "augment") config.augment = parse_int(key, value) != 0;
    else if (key == "out") config.out = value;
    else
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
  }
  if (config.classes.empty()) config.classes = {0};
  if (config.seeds.empty()) config.seeds = {0};
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "dataset=" << c.dataset << "\n";
  os << "oe_dataset=" << c.oe_dataset << "\n";
  os << "method=" << c.method << "\n";
  os << "radial=" << c.radial << "\n";
  os << "gamma=" << format_double(c.gamma) << "\n";
  os << "alpha=" << format_double(c.alpha) << "\n";
  os << "eta=" << format_double(c.eta) << "\n";
  os << "sweep_axis=" << c.sweep_axis << "\n";
  for (double v : c.axis_values) os << "axis_value=" << format_double(v) << "\n";
  for (int v : c.classes) os << "class=" << v << "\n";
  for (std::uint64_t v : c.seeds) os << "seed=" << v << "\n";
  os << "profile=" << c.profile << "\n";
  if (c.oe_size == data::OeSpec::kAll)
    os << "oe_size=all\n";
  else
    os << "oe_size=" << c.oe_size << "\n";
  os << "diversity_k=" << c.diversity_k << "\n";
  os << "blur_sigma=" << format_double(c.blur_sigma) << "\n";
  os << "augment=" << (c.augment ? 1 : 0) << "\n";
  os << "out=" << c.out << "\n";
  return os.str();
}

void validate_config(const ExperimentConfig& c) {
  try {
    const auto method = objectives::method_from_name(c.method);
    objectives::radial_from_name(c.radial);
    if (method == objectives::Method::FOCAL && c.gamma < 0.0)
      throw ConfigError("gamma must be >= 0");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  static const std::set<std::string> kAxes = {"none", "oe_size", "diversity_k",
                                             "blur_sigma", "gamma"};
  if (!kAxes.count(c.sweep_axis))
    throw ConfigError("unknown sweep_axis '" + c.sweep_axis + "'");
  if (c.sweep_axis != "none" && c.axis_values.empty())
    throw ConfigError("sweep_axis '" + c.sweep_axis + "' needs axis_value lines");
  if (c.sweep_axis == "none" && !c.axis_values.empty())
    throw ConfigError("axis_value given but sweep_axis is none");
  for (double v : c.axis_values) {
    if (c.sweep_axis == "blur_sigma" && v < 0.0)
      throw ConfigError("blur_sigma values must be >= 0");
    if (c.sweep_axis == "gamma" && v < 0.0)
      throw ConfigError("gamma values must be >= 0");
    if ((c.sweep_axis == "oe_size" || c.sweep_axis == "diversity_k") &&
        (v < 0.0 || v != std::floor(v)))
      throw ConfigError(c.sweep_axis + " values must be non-negative integers");
    if (c.sweep_axis == "diversity_k" && v < 1.0)
      throw ConfigError("diversity_k values must be >= 1");
  }
  if (c.profile != "desk" && c.profile != "paper")
    throw ConfigError("profile must be 'desk' or 'paper'");
  if (c.classes.empty()) throw ConfigError("at least one class is required");
  if (c.seeds.empty()) throw ConfigError("at least one seed is required");
  if (c.blur_sigma < 0.0) throw ConfigError("blur_sigma must be >= 0");
}

std::string config_digest(const ExperimentConfig& c) {
  // context only: method, classes, seeds and the swept base field are the
  // run-varying dimensions a report may pool over
  std::ostringstream os;
  os << "dataset=" << c.dataset << ";oe_dataset=" << c.oe_dataset
     << ";radial=" << c.radial << ";alpha=" << format_double(c.alpha)
     << ";eta=" << format_double(c.eta) << ";sweep_axis=" << c.sweep_axis
     << ";profile=" << c.profile << ";augment=" << (c.augment ? 1 : 0);
  for (double v : c.axis_values) os << ";axis_value=" << format_double(v);
  if (c.sweep_axis != "gamma") os << ";gamma=" << format_double(c.gamma);
  if (c.sweep_axis != "oe_size") {
    if (c.oe_size == data::OeSpec::kAll)
      os << ";oe_size=all";
    else
      os << ";oe_size=" << c.oe_size;
  }
  if (c.sweep_axis != "diversity_k") os << ";diversity_k=" << c.diversity_k;
  if (c.sweep_axis != "blur_sigma")
    os << ";blur_sigma=" << format_double(c.blur_sigma);
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (char ch : os.str()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string to_json_line(const RunRecord& r) {
  json j;
  j["dataset"] = r.dataset;
  j["method"] = r.method;
  j["radial"] = r.radial;
  j["nominal_class"] = r.nominal_class;
  j["oe_size"] = r.oe_size;
  j["diversity_k"] = r.diversity_k;
  j["blur_sigma"] = r.blur_sigma;
  j["gamma"] = r.gamma;
  j["seed"] = r.seed;
  j["auc"] = r.auc;
  j["epochs"] = r.epochs;
  j["wall_clock_s"] = r.wall_clock_s;
  j["config_digest"] = r.config_digest;
  return j.dump();
}

RunRecord from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad result line: ") + e.what());
  }
  RunRecord r;
  try {
    r.dataset = j.at("dataset");
    r.method = j.at("method");
    r.radial = j.at("radial");
    r.nominal_class = j.at("nominal_class");
    r.oe_size = j.at("oe_size");
    r.diversity_k = j.at("diversity_k");
    r.blur_sigma = j.at("blur_sigma");
    r.gamma = j.at("gamma");
    r.seed = j.at("seed");
    r.auc = j.at("auc");
    r.epochs = j.at("epochs");
    r.wall_clock_s = j.at("wall_clock_s");
    r.config_digest = j.at("config_digest");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("result line missing field: ") + e.what());
  }
  return r;
}

namespace {

void require_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path))
    throw DataError("missing dataset file: " + path.string() + " (" + hint +
                    ")");
}

data::Dataset load_named_split(const std::string& name,
                               const std::string& data_root, bool train) {
  const fs::path root = fs::path(data_root) / name;
  const std::string split = train ? "train" : "test";
  if (name == "multiscale" || name == "multiscale-fine") {
    if (train)
      return data::generate_multiscale(kMsTrainNominal,
                                       data::MultiscaleKind::Nominal,
                                       kMsSeedTrainNominal, name, "train");
    data::Dataset test = data::generate_multiscale(
        kMsTestPerClass, data::MultiscaleKind::Nominal, kMsSeedTestNominal,
        name, "test");
    if (name == "multiscale")
      test = data::concat(
          test, data::generate_multiscale(kMsTestPerClass,
                                          data::MultiscaleKind::CoarseAnomaly,
                                          kMsSeedTestCoarse, name, "test"));
    return data::concat(
        test, data::generate_multiscale(kMsTestPerClass,
                                        data::MultiscaleKind::FineAnomaly,
                                        kMsSeedTestFine, name, "test"));
  }
  if (name == "multiscale-oe")
    return data::generate_multiscale(kMsOePool,
                                     data::MultiscaleKind::CoarseAnomaly,
                                     kMsSeedOePool, name, "train");
  if (name == "mnist") {
    const std::string img = train ? "train-images-idx3-ubyte"
                                  : "t10k-images-idx3-ubyte";
    const std::string lab = train ? "train-labels-idx1-ubyte"
                                  : "t10k-labels-idx1-ubyte";
    const std::string hint = "expected layout <data-root>/mnist/" + img;
    require_file(root / img, hint);
    require_file(root / lab, hint);
    return data::load_idx((root / img).string(), (root / lab).string(), name,
                          split);
  }
  if (name == "emnist-letters") {
    const std::string stem = "emnist-letters-" + split;
    const std::string img = stem + "-images-idx3-ubyte";
    const std::string lab = stem + "-labels-idx1-ubyte";
    const std::string hint =
        "expected layout <data-root>/emnist-letters/" + img;
    require_file(root / img, hint);
    require_file(root / lab, hint);
    return data::load_idx((root / img).string(), (root / lab).string(), name,
                          split, /*transpose=*/true);
  }
  if (name == "cifar10") {
    std::vector<std::string> paths;
    if (train) {
      for (int b = 1; b <= 5; ++b) {
        const fs::path p = root / ("data_batch_" + std::to_string(b) + ".bin");
        require_file(p, "expected layout <data-root>/cifar10/data_batch_N.bin");
        paths.push_back(p.string());
      }
    } else {
      const fs::path p = root / "test_batch.bin";
      require_file(p, "expected layout <data-root>/cifar10/test_batch.bin");
      paths.push_back(p.string());
    }
    return data::load_cifar_binary(paths, name, split);
  }
  throw DataError("unknown dataset '" + name +
                  "' (known: mnist, emnist-letters, cifar10, multiscale, "
                  "multiscale-fine, multiscale-oe)");
}

nn::Network build_net_for(const data::Dataset& train, std::uint64_t seed) {
  if (train.channels == 1 && train.height == 28 && train.width == 28)
    return nn::build_mnist_net(seed);
  if (train.channels == 3 && train.height == 32 && train.width == 32)
    return nn::build_cifar_net(seed);
  if (train.channels == 1 && train.height == 32 && train.width == 32)
    return nn::build_synthetic_net(seed);
  throw DataError("no network architecture for image shape (" +
                  std::to_string(train.channels) + "," +
                  std::to_string(train.height) + "," +
                  std::to_string(train.width) + ")");
}

}  // namespace

LoadedData load_experiment_data(const ExperimentConfig& config,
                                const std::string& data_root) {
  LoadedData loaded;
  loaded.train = load_named_split(config.dataset, data_root, true);
  loaded.test = load_named_split(config.dataset, data_root, false);
  if (!config.oe_dataset.empty())
    loaded.oe_pool = load_named_split(config.oe_dataset, data_root, true);
  return loaded;
}

engine::Schedule profile_schedule(const std::string& profile,
                                  const std::string& dataset) {
  engine::Schedule s;
  if (profile == "paper") {
    if (dataset.rfind("cifar", 0) == 0) {
      s.epochs = 200;
      s.milestones = {100, 150};
    } else {
      s.epochs = 150;
      s.milestones = {50, 100};
    }
  } else {
    s.epochs = 20;
    s.milestones = {10, 15};
  }
  return s;
}

data::AugmentSpec augment_for(const data::Dataset& train) {
  data::AugmentSpec spec;
  spec.jitter = true;
  spec.crop = true;
  spec.crop_pad = train.height == 28 ? 2 : 4;
  spec.flip = train.channels == 3;  // digits and letters are chirality-bound
  spec.noise = true;
  return spec;
}

RunRecord execute_run(const ExperimentConfig& config, const LoadedData& loaded,
                      int nominal_class, std::uint64_t seed,
                      std::optional<double> axis_value) {
  const auto t0 = std::chrono::steady_clock::now();

  data::OeSpec oe_spec;
  oe_spec.size = config.oe_size;
  oe_spec.diversity_k = config.diversity_k;
  oe_spec.blur_sigma = config.blur_sigma;
  oe_spec.seed = seed;

  objectives::ObjectiveSpec objective;
  objective.method = objectives::method_from_name(config.method);
  objective.radial = objectives::radial_from_name(config.radial);
  objective.gamma = config.gamma;
  objective.alpha = config.alpha;
  objective.eta = config.eta;

  if (axis_value) {
    if (config.sweep_axis == "oe_size")
      oe_spec.size = static_cast<std::size_t>(*axis_value);
    else if (config.sweep_axis == "diversity_k")
      oe_spec.diversity_k = static_cast<std::size_t>(*axis_value);
    else if (config.sweep_axis == "blur_sigma")
      oe_spec.blur_sigma = *axis_value;
    else if (config.sweep_axis == "gamma")
      objective.gamma = *axis_value;
  }

  data::Dataset empty_pool;
  empty_pool.channels = loaded.train.channels;
  empty_pool.height = loaded.train.height;
  empty_pool.width = loaded.train.width;
  const data::Dataset& pool =
      loaded.oe_pool ? *loaded.oe_pool : empty_pool;
  data::BenchmarkTask task = data::make_one_vs_rest(
      loaded.train, loaded.test, pool, nominal_class, oe_spec);

  nn::Network net = build_net_for(loaded.train, seed);
  nn::ClassifierHead head = nn::build_head(net.output_dim(), seed + 1);
  nn::ClassifierHead* head_ptr = objective.uses_head() ? &head : nullptr;

  engine::TrainOptions opt;
  opt.schedule = profile_schedule(config.profile, config.dataset);
  if (config.augment) opt.augment = augment_for(loaded.train);
  engine::train(task, objective, net, head_ptr, opt, seed);
  engine::RunResult result = engine::evaluate(task, net, head_ptr, objective);

  RunRecord record;
  record.dataset = config.dataset;
  record.method = config.method;
  record.radial = config.radial;
  record.nominal_class = nominal_class;
  record.oe_size = task.oe_train.size();
  record.diversity_k = oe_spec.diversity_k;
  record.blur_sigma = oe_spec.blur_sigma;
  record.gamma = objective.gamma;
  record.seed = seed;
  record.auc = result.auc;
  record.epochs = opt.schedule.epochs;
  record.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  record.config_digest = config_digest(config);
  return record;
}

std::vector<RunRecord> cmd_run(const ExperimentConfig& config,
                               const std::string& data_root, std::size_t jobs,
                               bool quiet) {
  validate_config(config);
  const LoadedData loaded = load_experiment_data(config, data_root);

  struct Cell {
    int cls;
    std::optional<double> axis;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  std::vector<std::optional<double>> axis_values;
  if (config.sweep_axis == "none")
    axis_values.push_back(std::nullopt);
  else
    for (double v : config.axis_values) axis_values.push_back(v);
  for (int cls : config.classes)
    for (const auto& axis : axis_values)
      for (std::uint64_t seed : config.seeds) cells.push_back({cls, axis, seed});

  std::vector<RunRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      records[i] = execute_run(config, loaded, cells[i].cls, cells[i].seed,
                               cells[i].axis);
      if (!quiet) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cout << "run " << (i + 1) << "/" << cells.size() << " class "
                  << cells[i].cls << " seed " << cells[i].seed << " auc "
                  << records[i].auc << "\n";
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::ofstream os(config.out, std::ios::app);
  if (!os) throw DataError("cannot open results file: " + config.out);
  for (const auto& r : records) os << to_json_line(r) << "\n";
  if (!quiet) std::cout << report_table(records);
  return records;
}

std::vector<PlotPoint> plot_series(const std::vector<RunRecord>& records,
                                   const std::string& axis) {
  auto x_of = [&](const RunRecord& r) -> double {
    if (axis == "oe_size") return static_cast<double>(r.oe_size);
    if (axis == "diversity_k") return static_cast<double>(r.diversity_k);
    if (axis == "blur_sigma") return r.blur_sigma;
    if (axis == "gamma") return r.gamma;
    throw ConfigError("unknown plot axis '" + axis + "'");
  };
  // (x, method) -> class -> aucs over seeds
  std::map<std::pair<double, std::string>, std::map<int, std::vector<double>>>
      groups;
  for (const auto& r : records)
    groups[{x_of(r), r.method}][r.nominal_class].push_back(r.auc);
  std::vector<PlotPoint> series;
  for (const auto& [key, by_class] : groups) {
    std::vector<double> class_means;
    for (const auto& [cls, aucs] : by_class) {
      double mean = 0.0;
      for (double v : aucs) mean += v;
      class_means.push_back(mean / static_cast<double>(aucs.size()));
    }
    double mean = 0.0;
    for (double v : class_means) mean += v;
    mean /= static_cast<double>(class_means.size());
    // spread over every run in the group, not only class means, so a
    // single-class sweep still shows seed noise
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& [cls, aucs] : by_class)
      for (double v : aucs) {
        ss += (v - mean) * (v - mean);
        ++n;
      }
    PlotPoint point;
    point.x = key.first;
    point.method = key.second;
    point.mean_auc_pct = 100.0 * mean;
    point.std_auc_pct = n > 1 ? 100.0 * std::sqrt(ss / static_cast<double>(n - 1))
                              : 0.0;
    series.push_back(point);
  }
  return series;
}

void write_plot_csv(const std::vector<PlotPoint>& series,
                    const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open plot file: " + path);
  os << "x,method,mean_auc,std_auc\n";
  for (const auto& p : series)
    os << p.x << "," << p.method << "," << p.mean_auc_pct << ","
       << p.std_auc_pct << "\n";
}

std::string report_table(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ConfigError("no results to report");
  std::set<std::string> method_set;
  std::set<int> class_set;
  for (const auto& r : records) {
    method_set.insert(r.method);
    class_set.insert(r.nominal_class);
  }
  std::vector<std::string> methods(method_set.begin(), method_set.end());
  std::ostringstream os;
  os << "class";
  for (const auto& m : methods) os << "  |  " << m;
  os << "\n";
  std::map<std::string, std::vector<double>> class_means;
  for (int cls : class_set) {
    os << cls;
    for (const auto& m : methods) {
      std::vector<double> aucs;
      for (const auto& r : records)
        if (r.nominal_class == cls && r.method == m) aucs.push_back(r.auc);
      if (aucs.empty()) {
        os << "  |  -";
        continue;
      }
      double mean = 0.0;
      for (double v : aucs) mean += v;
      mean /= static_cast<double>(aucs.size());
      double ss = 0.0;
      for (double v : aucs) ss += (v - mean) * (v - mean);
      const double sd = aucs.size() > 1
                            ? std::sqrt(ss / static_cast<double>(aucs.size() - 1))
                            : 0.0;
      char cell[64];
      std::snprintf(cell, sizeof(cell), "  |  %5.1f +- %4.1f", 100.0 * mean,
                    100.0 * sd);
      os << cell;
      class_means[m].push_back(mean);
    }
    os << "\n";
  }
  os << "Mean AUC";
  for (const auto& m : methods) {
    const auto& means = class_means[m];
    double grand = 0.0;
    for (double v : means) grand += v;
    grand = means.empty() ? 0.0 : grand / static_cast<double>(means.size());
    char cell[32];
    std::snprintf(cell, sizeof(cell), "  |  %5.1f", 100.0 * grand);
    os << cell;
  }
  os << "\n";
  return os.str();
}

std::string cmd_report(const std::vector<std::string>& result_files) {
  std::vector<RunRecord> records;
  for (const auto& file : result_files) {
    std::ifstream is(file);
    if (!is) throw DataError("cannot open results file: " + file);
    std::string line;
    while (std::getline(is, line)) {
      if (trim(line).empty()) continue;
      records.push_back(from_json_line(line));
    }
  }
  if (records.empty()) throw ConfigError("no results to report");
  std::set<std::string> digests;
  for (const auto& r : records) digests.insert(r.config_digest);
  if (digests.size() > 1) {
    std::string msg = "refusing to aggregate results from different sweeps;"
                      " digests:";
    for (const auto& d : digests) msg += " " + d;
    throw ConfigError(msg);
  }
  return report_table(records);
}

namespace {

// toy points live in [-5,5]^2; the network sees them affinely mapped into
// the [0,1] pixel range the pipeline expects
double toy_scale(double v) { return std::clamp((v + 5.0) / 10.0, 0.0, 1.0); }

data::Dataset toy_points(const std::vector<double>& xy, int label) {
  data::Dataset ds;
  ds.name = "toy2d";
  ds.split = "train";
  ds.channels = 1;
  ds.height = 1;
  ds.width = 2;
  ds.pixels.reserve(xy.size());
  for (double v : xy) ds.pixels.push_back(toy_scale(v));
  ds.labels.assign(xy.size() / 2, label);
  return ds;
}

constexpr std::size_t kToyNominal = 500;
constexpr std::size_t kToyOe = 200;
constexpr std::size_t kToyGrid = 200;

}  // namespace

void cmd_toy2d(const std::string& out_dir, std::uint64_t seed, bool quiet) {
  fs::create_directories(out_dir);
  std::ofstream thresholds(fs::path(out_dir) / "thresholds.csv");
  if (!thresholds)
    throw DataError("cannot open output directory: " + out_dir);
  thresholds << "setting,method,threshold\n";

  for (const std::string setting : {"ideal", "skewed"}) {
    std::mt19937_64 rng(seed * 1000 + (setting == "ideal" ? 1 : 2));
    std::normal_distribution<double> nominal_dist(0.0, 0.5);
    std::vector<double> nominal_xy;
    for (std::size_t i = 0; i < 2 * kToyNominal; ++i)
      nominal_xy.push_back(nominal_dist(rng));
    std::vector<double> oe_xy;
    if (setting == "ideal") {
      std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
      for (std::size_t i = 0; i < kToyOe; ++i) {
        const double a = angle(rng);
        oe_xy.push_back(3.0 * std::cos(a));
        oe_xy.push_back(3.0 * std::sin(a));
      }
    } else {
      std::normal_distribution<double> skew(0.0, 0.5);
      for (std::size_t i = 0; i < kToyOe; ++i) {
        oe_xy.push_back(3.0 + skew(rng));
        oe_xy.push_back(skew(rng));
      }
    }

    data::BenchmarkTask task;
    task.nominal_class = 0;
    task.nominal_train = toy_points(nominal_xy, 0);
    task.oe_train = toy_points(oe_xy, 1);

    // the toy nets are tiny, so train them well past the desk defaults;
    // 500 nominal points at batch 64 gives 7 steps per epoch
    engine::TrainOptions opt;
    opt.schedule.epochs = 200;
    opt.schedule.milestones = {120, 160};
    opt.batch_nominal = 64;
    opt.batch_oe = 64;

    nn::Network hsc_net = nn::build_toy_mlp({64, 64}, seed + 11, true, 32);
    objectives::ObjectiveSpec hsc;
    hsc.method = objectives::Method::HSC;
    engine::train(task, hsc, hsc_net, nullptr, opt, seed + 21);

    nn::Network bce_net = nn::build_toy_mlp({64, 64}, seed + 12, true, 32);
    nn::ClassifierHead bce_head = nn::build_head(bce_net.output_dim(), seed + 13);
    objectives::ObjectiveSpec bce;
    bce.method = objectives::Method::BCE;
    engine::train(task, bce, bce_net, &bce_head, opt, seed + 22);

    // score the 200x200 grid over [-5,5]^2, endpoints included
    std::vector<double> grid_xy;
    grid_xy.reserve(2 * kToyGrid * kToyGrid);
    for (std::size_t j = 0; j < kToyGrid; ++j)
      for (std::size_t i = 0; i < kToyGrid; ++i) {
        grid_xy.push_back(-5.0 + 10.0 * static_cast<double>(i) /
                                     static_cast<double>(kToyGrid - 1));
        grid_xy.push_back(-5.0 + 10.0 * static_cast<double>(j) /
                                     static_cast<double>(kToyGrid - 1));
      }
    data::Dataset grid = toy_points(grid_xy, 0);
    const auto grid_hsc = engine::score_dataset(grid, hsc_net, nullptr, hsc);
    const auto grid_bce =
        engine::score_dataset(grid, bce_net, &bce_head, bce);

    const fs::path grid_path = fs::path(out_dir) / (setting + "_grid.csv");
    std::ofstream os(grid_path);
    if (!os) throw DataError("cannot open plot file: " + grid_path.string());
    for (std::size_t i = 0; i < grid.size(); ++i)
      os << grid_xy[2 * i] << "," << grid_xy[2 * i + 1] << ","
         << grid_bce[i] << "," << grid_hsc[i] << "\n";

    // 95th-percentile nominal training score per method
    auto percentile95 = [](std::vector<double> scores) {
      std::sort(scores.begin(), scores.end());
      const std::size_t idx = static_cast<std::size_t>(
          std::ceil(0.95 * static_cast<double>(scores.size()))) - 1;
      return scores[idx];
    };
    const auto nominal_hsc =
        engine::score_dataset(task.nominal_train, hsc_net, nullptr, hsc);
    const auto nominal_bce =
        engine::score_dataset(task.nominal_train, bce_net, &bce_head, bce);
    thresholds << setting << ",hsc," << percentile95(nominal_hsc) << "\n";
    thresholds << setting << ",bce," << percentile95(nominal_bce) << "\n";
    if (!quiet) std::cout << "toy2d " << setting << " written\n";
  }
}

}  // namespace oebench::expcli
