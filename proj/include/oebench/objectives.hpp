#pragma once

#include <span>
#include <string>
#include <vector>

#include "oebench/tensor.hpp"

namespace oebench::objectives {

enum class Method { DSVDD, DSAD, HSC, BCE, FOCAL };
enum class RadialKind { L1, L2, L2SQ, PseudoHuber };

std::string method_name(Method m);
std::string radial_name(RadialKind k);
Method method_from_name(const std::string& s);
RadialKind radial_from_name(const std::string& s);

/// Log arguments are clamped here so a perfectly centered anomaly cannot
/// produce -inf; the saturation counter tracks how often that engaged.
constexpr double kLogClamp = 1e-12;

/// Which loss to train with plus its hyperparameters. The center is set
/// once before training (mean initial feature of the nominal set, small
/// components pushed to +-0.1) and then frozen.
struct ObjectiveSpec {
  Method method = Method::HSC;
  RadialKind radial = RadialKind::PseudoHuber;  // HSC only
  double gamma = 2.0;                           // FOCAL only
  double alpha = 0.5;                           // FOCAL only
  double eta = 1.0;                             // DSAD only
  double eps = 1e-6;                            // DSAD only
  std::vector<double> center;                   // DSVDD/DSAD only
  mutable long long saturations = 0;

  bool uses_head() const { return method == Method::BCE || method == Method::FOCAL; }
  bool uses_center() const {
    return method == Method::DSVDD || method == Method::DSAD;
  }
};

/// h(z) on a plain feature row; used for anomaly scoring.
double radial_h(RadialKind kind, std::span<const double> z);

/// Per-sample h(z) over a (B, r) feature batch, differentiable.
Tensor radial_rowwise(Tape& tape, RadialKind kind, const Tensor& features);

/// mean over batch of y*h(z) - (1-y)*log(1 - exp(-h(z))).
Tensor hsc_loss(Tape& tape, const ObjectiveSpec& spec, const Tensor& features,
                const Tensor& labels);

/// -(1/n) sum y log p + (1-y) log(1-p), probabilities clamped.
Tensor bce_loss(Tape& tape, const Tensor& probs, const Tensor& labels,
                long long* saturations = nullptr);

/// -(1/n) sum alpha_t (1-p_t)^gamma log p_t.
Tensor focal_loss(Tape& tape, const Tensor& probs, const Tensor& labels,
                  double gamma, double alpha, long long* saturations = nullptr);

/// (1/n) sum ||z - c||^2, every sample treated as nominal.
Tensor dsvdd_loss(Tape& tape, const Tensor& features, const Tensor& center);

/// (1/n) [ sum_{y=1} ||z-c||^2 + eta sum_{y=0} (||z-c||^2 + eps)^-1 ].
Tensor dsad_loss(Tape& tape, const Tensor& features, const Tensor& labels,
                 const Tensor& center, double eta, double eps);

/// Dispatch for the trainer: features for hypersphere methods, head
/// probabilities for the classifier methods.
Tensor compute_loss(Tape& tape, const ObjectiveSpec& spec,
                    const Tensor& features_or_probs, const Tensor& labels);

/// Higher score = more anomalous.
/// DSVDD/DSAD -> ||z-c||^2; HSC -> h(z); classifier -> 1 - p(nominal).
double anomaly_score(const ObjectiveSpec& spec, std::span<const double> feature_row);
double anomaly_score_prob(double p_nominal);

}  // namespace oebench::objectives
