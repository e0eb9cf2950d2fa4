#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oebench/data.hpp"
#include "oebench/engine.hpp"
#include "oebench/nn.hpp"
#include "oebench/objectives.hpp"

namespace oebench::expcli {

/// Mapped to process exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Mapped to process exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value experiment description; lists are repeated keys.
struct ExperimentConfig {
  std::string dataset = "multiscale";
  std::string oe_dataset = "multiscale-oe";  // empty = no OE (pure one-class)
  std::string method = "hsc";
  std::string radial = "pseudo-huber";
  double gamma = 2.0;
  double alpha = 0.5;
  double eta = 1.0;
  std::string sweep_axis = "none";  // oe_size|diversity_k|blur_sigma|gamma|none
  std::vector<double> axis_values;
  std::vector<int> classes = {0};
  std::vector<std::uint64_t> seeds = {0};
  std::string profile = "desk";  // desk | paper
  std::size_t oe_size = data::OeSpec::kAll;
  std::size_t diversity_k = 0;
  double blur_sigma = 0.0;
  bool augment = false;
  std::string out = "results.jsonl";

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);
void validate_config(const ExperimentConfig& config);

/// FNV-1a hex over the experimental context: everything except the fields a
/// single sweep varies per run (method, class, seed, the sweep-axis value)
/// and the output path. All lines of one sweep share this digest; report
/// refuses to mix lines whose digests differ.
std::string config_digest(const ExperimentConfig& config);

/// One JSONL result line.
struct RunRecord {
  std::string dataset;
  std::string method;
  std::string radial;
  int nominal_class = 0;
  std::size_t oe_size = 0;  // actual OE count used
  std::size_t diversity_k = 0;
  double blur_sigma = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  std::size_t epochs = 0;
  double wall_clock_s = 0.0;
  std::string config_digest;
};

std::string to_json_line(const RunRecord& record);
RunRecord from_json_line(const std::string& line);

/// Train/test/OE splits resolved from the data root. Synthetic datasets are
/// generated from frozen seeds; file-backed ones are loaded from
/// <root>/<name>/. Missing files raise DataError naming the expected path.
struct LoadedData {
  data::Dataset train;
  data::Dataset test;
  std::optional<data::Dataset> oe_pool;
};
LoadedData load_experiment_data(const ExperimentConfig& config,
                                const std::string& data_root);

engine::Schedule profile_schedule(const std::string& profile,
                                  const std::string& dataset);
data::AugmentSpec augment_for(const data::Dataset& train);

/// Builds the conv net matching the dataset geometry (28x28x1, 32x32x3 or
/// 32x32x1) and trains one (class, seed, axis-value) cell.
RunRecord execute_run(const ExperimentConfig& config, const LoadedData& loaded,
                      int nominal_class, std::uint64_t seed,
                      std::optional<double> axis_value);

/// Runs the full (class x seed x axis-value) grid, appends JSONL lines to
/// config.out, and returns the records in deterministic grid order
/// regardless of `jobs`.
std::vector<RunRecord> cmd_run(const ExperimentConfig& config,
                               const std::string& data_root,
                               std::size_t jobs = 1, bool quiet = false);

struct PlotPoint {
  double x = 0.0;
  std::string method;
  double mean_auc_pct = 0.0;  // AUC in percent
  double std_auc_pct = 0.0;
};

/// Per (axis value, method): seeds averaged per class first, then classes
/// averaged; std pooled over per-class means. `axis` picks which record
/// field supplies x (oe_size, diversity_k, blur_sigma or gamma).
std::vector<PlotPoint> plot_series(const std::vector<RunRecord>& records,
                                   const std::string& axis);
void write_plot_csv(const std::vector<PlotPoint>& series,
                    const std::string& path);

/// Text table: one row per class, one column per method,
/// mean +- std over seeds, and a final grand-mean row.
std::string report_table(const std::vector<RunRecord>& records);

/// Loads JSONL result files and renders the table; throws ConfigError when
/// digests differ across lines or the input is empty.
std::string cmd_report(const std::vector<std::string>& result_files);

/// The 2D toy study: a nominal Gaussian cluster with OE placed either all
/// around (ideal) or to one side (skewed); BCE and HSC trained on each.
/// Writes <setting>_grid.csv (x, y, score_bce, score_hsc; 200x200 over
/// [-5,5]^2) and thresholds.csv (95th-percentile nominal score per setting
/// and method).
void cmd_toy2d(const std::string& out_dir, std::uint64_t seed = 0,
               bool quiet = false);

}  // namespace oebench::expcli
