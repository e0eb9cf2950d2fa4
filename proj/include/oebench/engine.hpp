#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "oebench/data.hpp"
#include "oebench/nn.hpp"
#include "oebench/objectives.hpp"
#include "oebench/tensor.hpp"

namespace oebench::engine {

/// Adam with bias-corrected moments. State is positional: the caller must
/// pass the same parameter list, in the same order, on every step.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Reads each parameter's accumulated gradient, applies the update, and
  /// zeroes the gradient. Throws on any non-finite gradient entry.
  void step(const std::vector<Tensor>& params, double lr);

  long long step_count() const { return step_count_; }

 private:
  double beta1_, beta2_, eps_;
  long long step_count_ = 0;
  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<Moments> state_;
};

/// Base learning rate decayed by `factor` at each milestone epoch.
struct Schedule {
  std::size_t epochs = 20;
  std::vector<std::size_t> milestones = {10, 15};
  double factor = 0.1;
  double base_lr = 1e-3;

  void validate() const;
  double lr_at(std::size_t epoch) const;  // 0-based epoch index
};

struct TrainOptions {
  Schedule schedule;
  std::size_t batch_nominal = 128;
  std::size_t batch_oe = 128;
  data::AugmentSpec augment;
  std::size_t eval_batch = 256;
};

struct RunResult {
  std::string config_digest;
  double auc = 0.0;
  std::vector<double> loss_trace;  // one mean loss per epoch
  long long saturations = 0;
  double wall_clock_s = 0.0;
  std::uint64_t seed = 0;
};

/// Mean eval-mode feature of the nominal training set, with every component
/// of magnitude below 0.1 pushed to +-0.1 so the center cannot collapse onto
/// the features. Used once before training for DSVDD/DSAD.
std::vector<double> init_center(nn::Network& net, const data::Dataset& nominal,
                                std::size_t batch = 256);

/// Trains in place and returns the per-epoch mean loss trace. `head` must be
/// non-null exactly when the objective is a classifier (BCE/Focal). Each step
/// takes batch_nominal nominal images (shuffled without replacement per
/// epoch) plus an OE draw; steps per epoch = floor(|nominal| / batch_nominal).
/// Throws on a non-finite loss or gradient.
std::vector<double> train(const data::BenchmarkTask& task,
                          objectives::ObjectiveSpec& objective,
                          nn::Network& net, nn::ClassifierHead* head,
                          const TrainOptions& opt, std::uint64_t seed);

/// Exact Mann-Whitney AUC via midranks; ties count one half. Anomalies are
/// the high-score class. Throws if either list is empty.
double auc(const std::vector<double>& nominal_scores,
           const std::vector<double>& anomalous_scores);

/// Eval-mode anomaly scores for every image, higher = more anomalous.
std::vector<double> score_dataset(const data::Dataset& ds, nn::Network& net,
                                  nn::ClassifierHead* head,
                                  const objectives::ObjectiveSpec& objective,
                                  std::size_t batch = 256);

/// Scores the task's test split and computes AUC against its binary labels.
RunResult evaluate(const data::BenchmarkTask& task, nn::Network& net,
                   nn::ClassifierHead* head,
                   const objectives::ObjectiveSpec& objective,
                   std::size_t batch = 256);

struct ClassStats {
  int nominal_class = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t runs = 0;
};

struct AggregateTable {
  std::vector<ClassStats> per_class;  // sorted by class id
  double grand_mean = 0.0;            // mean of the per-class means
};

/// Per-class mean and std over seeds, then the grand mean of class means
/// (so unequal seed counts per class do not skew the headline number).
AggregateTable aggregate(const std::vector<std::pair<int, double>>& class_auc);

}  // namespace oebench::engine
