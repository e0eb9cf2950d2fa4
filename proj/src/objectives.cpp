#include "oebench/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace oebench::objectives {

std::string method_name(Method m) {
  switch (m) {
    case Method::DSVDD: return "dsvdd";
    case Method::DSAD: return "dsad";
    case Method::HSC: return "hsc";
    case Method::BCE: return "bce";
    case Method::FOCAL: return "focal";
  }
  return "?";
}

std::string radial_name(RadialKind k) {
  switch (k) {
    case RadialKind::L1: return "l1";
    case RadialKind::L2: return "l2";
    case RadialKind::L2SQ: return "l2sq";
    case RadialKind::PseudoHuber: return "pseudo-huber";
  }
  return "?";
}

Method method_from_name(const std::string& s) {
  if (s == "dsvdd") return Method::DSVDD;
  if (s == "dsad") return Method::DSAD;
  if (s == "hsc") return Method::HSC;
  if (s == "bce") return Method::BCE;
  if (s == "focal") return Method::FOCAL;
  throw std::invalid_argument("unknown method: " + s);
}

RadialKind radial_from_name(const std::string& s) {
  if (s == "l1") return RadialKind::L1;
  if (s == "l2") return RadialKind::L2;
  if (s == "l2sq") return RadialKind::L2SQ;
  if (s == "pseudo-huber" || s == "ph") return RadialKind::PseudoHuber;
  throw std::invalid_argument("unknown radial function: " + s);
}

double radial_h(RadialKind kind, std::span<const double> z) {
  double sq = 0.0, l1 = 0.0;
  for (double v : z) {
    if (!std::isfinite(v))
      throw std::invalid_argument("radial_h: non-finite feature value");
    sq += v * v;
    l1 += std::abs(v);
  }
  switch (kind) {
    case RadialKind::L1: return l1;
    case RadialKind::L2: return std::sqrt(sq);
    case RadialKind::L2SQ: return sq;
    case RadialKind::PseudoHuber: return std::sqrt(sq + 1.0) - 1.0;
  }
  throw std::logic_error("unknown radial kind");
}

Tensor radial_rowwise(Tape& tape, RadialKind kind, const Tensor& features) {
  switch (kind) {
    case RadialKind::L1:
      return tape.rowwise_l1(features);
    case RadialKind::L2:
      return tape.rowwise_l2(features);
    case RadialKind::L2SQ:
      return tape.rowwise_sqnorm(features);
    case RadialKind::PseudoHuber:
      return tape.add_scalar(
          tape.sqrt(tape.add_scalar(tape.rowwise_sqnorm(features), 1.0)), -1.0);
  }
  throw std::logic_error("unknown radial kind");
}

namespace {

void require_binary_labels(const char* op, const Tensor& labels) {
  for (double y : labels.data())
    if (y != 0.0 && y != 1.0)
      throw std::invalid_argument(std::string(op) +
                                  ": labels must be 0 (anomalous) or 1 (nominal)");
}

Tensor one_minus(Tape& tape, const Tensor& t) {
  return tape.add_scalar(tape.scale(t, -1.0), 1.0);
}

}  // namespace

Tensor hsc_loss(Tape& tape, const ObjectiveSpec& spec, const Tensor& features,
                const Tensor& labels) {
  require_binary_labels("hsc_loss", labels);
  Tensor h = radial_rowwise(tape, spec.radial, features);
  // -log(1 - exp(-h)), clamped so h == 0 on an anomaly stays finite
  Tensor lin = tape.exp(tape.scale(h, -1.0));
  Tensor log_arg = tape.clamp(one_minus(tape, lin), kLogClamp, 1.0,
                              &spec.saturations);
  Tensor anom_term = tape.scale(tape.log(log_arg), -1.0);
  Tensor per_sample = tape.add(tape.mul(labels, h),
                               tape.mul(one_minus(tape, labels), anom_term));
  return tape.mean(per_sample);
}

Tensor bce_loss(Tape& tape, const Tensor& probs, const Tensor& labels,
                long long* saturations) {
  require_binary_labels("bce_loss", labels);
  Tensor p = tape.clamp(probs, kLogClamp, 1.0 - kLogClamp, saturations);
  Tensor per_sample =
      tape.add(tape.mul(labels, tape.log(p)),
               tape.mul(one_minus(tape, labels), tape.log(one_minus(tape, p))));
  return tape.scale(tape.mean(per_sample), -1.0);
}

Tensor focal_loss(Tape& tape, const Tensor& probs, const Tensor& labels,
                  double gamma, double alpha, long long* saturations) {
  require_binary_labels("focal_loss", labels);
  if (gamma < 0.0 || alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("focal_loss: need gamma >= 0 and alpha in (0,1)");
  Tensor p = tape.clamp(probs, kLogClamp, 1.0 - kLogClamp, saturations);
  // p_t = p if y=1 else 1-p
  Tensor p_t = tape.add(tape.mul(labels, p),
                        tape.mul(one_minus(tape, labels), one_minus(tape, p)));
  std::vector<double> alpha_t(labels.size());
  for (std::size_t i = 0; i < alpha_t.size(); ++i)
    alpha_t[i] = labels.data()[i] == 1.0 ? alpha : 1.0 - alpha;
  Tensor weight = tape.mul(Tensor::from(labels.shape(), std::move(alpha_t)),
                           tape.pow(one_minus(tape, p_t), gamma));
  Tensor per_sample = tape.mul(weight, tape.log(p_t));
  return tape.scale(tape.mean(per_sample), -1.0);
}

Tensor dsvdd_loss(Tape& tape, const Tensor& features, const Tensor& center) {
  Tensor d = tape.rowwise_sqnorm(tape.sub_rowvec(features, center));
  return tape.mean(d);
}

Tensor dsad_loss(Tape& tape, const Tensor& features, const Tensor& labels,
                 const Tensor& center, double eta, double eps) {
  require_binary_labels("dsad_loss", labels);
  if (eta <= 0.0 || eps <= 0.0)
    throw std::invalid_argument("dsad_loss: need eta > 0 and eps > 0");
  Tensor d = tape.rowwise_sqnorm(tape.sub_rowvec(features, center));
  Tensor inv = tape.scale(tape.pow(tape.add_scalar(d, eps), -1.0), eta);
  Tensor per_sample =
      tape.add(tape.mul(labels, d), tape.mul(one_minus(tape, labels), inv));
  return tape.mean(per_sample);
}

Tensor compute_loss(Tape& tape, const ObjectiveSpec& spec,
                    const Tensor& features_or_probs, const Tensor& labels) {
  switch (spec.method) {
    case Method::HSC:
      return hsc_loss(tape, spec, features_or_probs, labels);
    case Method::BCE:
      return bce_loss(tape, features_or_probs, labels, &spec.saturations);
    case Method::FOCAL:
      return focal_loss(tape, features_or_probs, labels, spec.gamma,
                        spec.alpha, &spec.saturations);
    case Method::DSVDD: {
      Tensor c = Tensor::from({spec.center.size()}, spec.center);
      return dsvdd_loss(tape, features_or_probs, c);
    }
    case Method::DSAD: {
      Tensor c = Tensor::from({spec.center.size()}, spec.center);
      return dsad_loss(tape, features_or_probs, labels, c, spec.eta, spec.eps);
    }
  }
  throw std::logic_error("unknown method");
}

double anomaly_score(const ObjectiveSpec& spec,
                     std::span<const double> feature_row) {
  switch (spec.method) {
    case Method::HSC:
      return radial_h(spec.radial, feature_row);
    case Method::DSVDD:
    case Method::DSAD: {
      if (spec.center.size() != feature_row.size())
        throw std::invalid_argument("anomaly_score: center dimension mismatch");
      double sq = 0.0;
      for (std::size_t i = 0; i < feature_row.size(); ++i) {
        const double d = feature_row[i] - spec.center[i];
        sq += d * d;
      }
      return sq;
    }
    case Method::BCE:
    case Method::FOCAL:
      throw std::invalid_argument(
          "anomaly_score: classifier methods score via anomaly_score_prob");
  }
  throw std::logic_error("unknown method");
}

double anomaly_score_prob(double p_nominal) { return 1.0 - p_nominal; }

}  // namespace oebench::objectives
