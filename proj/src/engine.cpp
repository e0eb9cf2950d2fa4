#include "oebench/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace oebench::engine {

void Adam::step(const std::vector<Tensor>& params, double lr) {
  if (state_.empty()) {
    state_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state_[i].m.assign(params[i].size(), 0.0);
      state_[i].v.assign(params[i].size(), 0.0);
    }
  }
  if (state_.size() != params.size())
    throw std::invalid_argument("Adam::step: parameter count changed");
  ++step_count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data();
    auto& g = params[i].grad();
    auto& m = state_[i].m;
    auto& v = state_[i].v;
    if (p.size() != m.size())
      throw std::invalid_argument("Adam::step: parameter shape changed");
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (!std::isfinite(g[j]))
        throw std::runtime_error(
            "Adam::step: non-finite gradient, aborting the run");
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
    params[i].zero_grad();
  }
}

void Schedule::validate() const {
  if (base_lr <= 0.0 || factor <= 0.0)
    throw std::invalid_argument("Schedule: base_lr and factor must be > 0");
  std::size_t prev = 0;
  bool first = true;
  for (std::size_t m : milestones) {
    if (!first && m <= prev)
      throw std::invalid_argument("Schedule: milestones must strictly increase");
    if (m >= epochs)
      throw std::invalid_argument("Schedule: milestones must be < epochs");
    prev = m;
    first = false;
  }
}

double Schedule::lr_at(std::size_t epoch) const {
  double lr = base_lr;
  for (std::size_t m : milestones)
    if (epoch >= m) lr *= factor;
  return lr;
}

namespace {

// gathers rows of a dataset (with optional augmentation) into one batch
Tensor gather_batch(const data::Dataset& ds,
                    const std::vector<std::size_t>& idx,
                    const data::AugmentSpec& augment, std::mt19937_64& rng) {
  const std::size_t elems = ds.image_elems();
  std::vector<double> xs;
  xs.reserve(idx.size() * elems);
  for (std::size_t i : idx) {
    auto img = ds.image(i);
    xs.insert(xs.end(), img.begin(), img.end());
  }
  for (std::size_t b = 0; b < idx.size(); ++b)
    data::augment_image({xs.data() + b * elems, elems}, ds.channels, ds.height,
                        ds.width, augment, rng);
  return Tensor::from(
      {idx.size(), ds.channels, ds.height, ds.width}, std::move(xs));
}

}  // namespace

std::vector<double> init_center(nn::Network& net, const data::Dataset& nominal,
                                std::size_t batch) {
  if (nominal.size() == 0)
    throw std::invalid_argument("init_center: empty nominal set");
  const nn::Mode saved = net.mode();
  net.set_mode(nn::Mode::Eval);
  const std::size_t r = net.output_dim();
  std::vector<double> center(r, 0.0);
  data::AugmentSpec no_augment;
  std::mt19937_64 unused_rng(0);
  for (std::size_t start = 0; start < nominal.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + batch, nominal.size()); ++i)
      idx.push_back(i);
    Tape tape;
    Tensor z = net.forward(tape, gather_batch(nominal, idx, no_augment,
                                              unused_rng));
    for (std::size_t b = 0; b < idx.size(); ++b)
      for (std::size_t j = 0; j < r; ++j) center[j] += z.data()[b * r + j];
  }
  for (double& c : center) {
    c /= static_cast<double>(nominal.size());
    // a center component too close to zero makes the trivial all-zero
    // feature map optimal; push it out
    if (std::fabs(c) < 0.1) c = c < 0.0 ? -0.1 : 0.1;
  }
  net.set_mode(saved);
  return center;
}

std::vector<double> train(const data::BenchmarkTask& task,
                          objectives::ObjectiveSpec& objective,
                          nn::Network& net, nn::ClassifierHead* head,
                          const TrainOptions& opt, std::uint64_t seed) {
  opt.schedule.validate();
  if (objective.uses_head() != (head != nullptr))
    throw std::invalid_argument(
        "train: classifier objectives need a head, hypersphere ones must not");
  const data::Dataset& nominal = task.nominal_train;
  if (nominal.size() == 0)
    throw std::invalid_argument("train: empty nominal training set");
  const std::size_t steps = nominal.size() / opt.batch_nominal;
  if (steps == 0)
    throw std::invalid_argument(
        "train: nominal set smaller than one nominal batch");

  if (objective.uses_center() && objective.center.empty())
    objective.center = init_center(net, nominal);

  std::vector<Tensor> params = net.parameters();
  if (head) {
    auto hp = head->parameters();
    params.insert(params.end(), hp.begin(), hp.end());
  }
  Adam adam;
  std::mt19937_64 rng(seed);
  data::OeSampler oe_sampler(task.oe_train.size());
  net.set_mode(nn::Mode::Train);

  std::vector<double> trace;
  trace.reserve(opt.schedule.epochs);
  std::vector<std::size_t> nominal_order(nominal.size());
  std::iota(nominal_order.begin(), nominal_order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < opt.schedule.epochs; ++epoch) {
    const double lr = opt.schedule.lr_at(epoch);
    std::shuffle(nominal_order.begin(), nominal_order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::size_t> nom_idx(
          nominal_order.begin() + static_cast<long>(s * opt.batch_nominal),
          nominal_order.begin() + static_cast<long>((s + 1) * opt.batch_nominal));
      std::vector<std::size_t> oe_idx = oe_sampler.draw(opt.batch_oe, rng);

      Tensor nom_batch = gather_batch(nominal, nom_idx, opt.augment, rng);
      std::vector<double> xs = nom_batch.data();
      std::vector<double> ys(nom_idx.size(), 1.0);
      if (!oe_idx.empty()) {
        Tensor oe_batch =
            gather_batch(task.oe_train, oe_idx, opt.augment, rng);
        xs.insert(xs.end(), oe_batch.data().begin(), oe_batch.data().end());
        ys.insert(ys.end(), oe_idx.size(), 0.0);
      }
      const std::size_t batch = ys.size();
      Tensor x = Tensor::from(
          {batch, nominal.channels, nominal.height, nominal.width},
          std::move(xs));
      Tensor labels = Tensor::from({batch}, std::move(ys));

      Tape tape;
      Tensor features_or_probs =
          head ? nn::forward_prob(net, *head, tape, x) : net.forward(tape, x);
      Tensor loss =
          objectives::compute_loss(tape, objective, features_or_probs, labels);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw std::runtime_error("train: non-finite loss, aborting the run");
      epoch_loss += value;
      tape.backward(loss);
      adam.step(params, lr);
    }
    trace.push_back(epoch_loss / static_cast<double>(steps));
  }
  return trace;
}

double auc(const std::vector<double>& nominal_scores,
           const std::vector<double>& anomalous_scores) {
  if (nominal_scores.empty() || anomalous_scores.empty())
    throw std::invalid_argument("auc: both score lists must be non-empty");
  struct Entry {
    double score;
    bool anomalous;
  };
  std::vector<Entry> all;
  all.reserve(nominal_scores.size() + anomalous_scores.size());
  for (double s : nominal_scores) all.push_back({s, false});
  for (double s : anomalous_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });
  // midranks: tied scores share the mean of their 1-based rank range
  double rank_sum_anomalous = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].anomalous) rank_sum_anomalous += midrank;
    i = j;
  }
  const double m = static_cast<double>(anomalous_scores.size());
  const double n = static_cast<double>(nominal_scores.size());
  return (rank_sum_anomalous - m * (m + 1.0) / 2.0) / (m * n);
}

std::vector<double> score_dataset(const data::Dataset& ds, nn::Network& net,
                                  nn::ClassifierHead* head,
                                  const objectives::ObjectiveSpec& objective,
                                  std::size_t batch) {
  const nn::Mode saved = net.mode();
  net.set_mode(nn::Mode::Eval);
  data::AugmentSpec no_augment;
  std::mt19937_64 unused_rng(0);
  std::vector<double> scores;
  scores.reserve(ds.size());
  for (std::size_t start = 0; start < ds.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + batch, ds.size()); ++i)
      idx.push_back(i);
    Tape tape;
    Tensor x = gather_batch(ds, idx, no_augment, unused_rng);
    if (head) {
      Tensor probs = nn::forward_prob(net, *head, tape, x);
      for (double p : probs.data())
        scores.push_back(objectives::anomaly_score_prob(p));
    } else {
      Tensor z = net.forward(tape, x);
      const std::size_t r = net.output_dim();
      for (std::size_t b = 0; b < idx.size(); ++b)
        scores.push_back(objectives::anomaly_score(
            objective, {z.data().data() + b * r, r}));
    }
  }
  net.set_mode(saved);
  return scores;
}

RunResult evaluate(const data::BenchmarkTask& task, nn::Network& net,
                   nn::ClassifierHead* head,
                   const objectives::ObjectiveSpec& objective,
                   std::size_t batch) {
  std::vector<double> scores =
      score_dataset(task.test, net, head, objective, batch);
  std::vector<double> nominal_scores, anomalous_scores;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (task.test_binary[i] == 1.0 ? nominal_scores : anomalous_scores)
        .push_back(scores[i]);
  RunResult result;
  result.auc = auc(nominal_scores, anomalous_scores);
  result.saturations = objective.saturations;
  return result;
}

AggregateTable aggregate(const std::vector<std::pair<int, double>>& class_auc) {
  std::map<int, std::vector<double>> by_class;
  for (const auto& [cls, value] : class_auc) by_class[cls].push_back(value);
  AggregateTable table;
  double total = 0.0;
  for (const auto& [cls, values] : by_class) {
    ClassStats stats;
    stats.nominal_class = cls;
    stats.runs = values.size();
    stats.mean = std::accumulate(values.begin(), values.end(), 0.0) /
                 static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
      stats.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    total += stats.mean;
    table.per_class.push_back(stats);
  }
  if (!table.per_class.empty())
    table.grand_mean = total / static_cast<double>(table.per_class.size());
  return table;
}

}  // namespace oebench::engine
