#pragma once

// Shared driver for finite-difference gradient checks over the primitive ops.
// Points are resampled away from non-differentiabilities (leaky-ReLU kinks,
// max-pool ties) before checking.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oebench/tensor.hpp"

namespace oebench::testsupport {

struct SuiteCase {
  std::string name;
  double worst_rel_error = 0.0;
  bool pass = true;
};

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0,
                            double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

// Keeps every coordinate at least `margin` away from zero (activation kinks).
inline void push_off_kinks(Tensor& t, double margin = 1e-2) {
  for (auto& v : t.data())
    if (v > -margin && v < margin) v = v < 0.0 ? -margin : margin;
}

// Separates the four candidates of every 2x2 max-pool window.
inline void break_pool_ties(Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] += 1e-4 * static_cast<double>(i % 7);
}

using PointLoss = std::function<Tensor(Tape&, const Tensor&)>;

// One named check: `make_point` draws a random instance, `loss` builds a
// scalar from it. Runs `instances` draws, records the worst relative error.
inline SuiteCase check_gradients(
    const std::string& name, int instances,
    const std::function<Tensor(std::mt19937_64&)>& make_point,
    const PointLoss& loss, double tolerance = 1e-4, double step = 1e-5,
    std::uint64_t seed = 20240817) {
  std::mt19937_64 rng(seed ^ std::hash<std::string>{}(name));
  SuiteCase result;
  result.name = name;
  for (int i = 0; i < instances; ++i) {
    Tensor point = make_point(rng);
    GradCheckReport r = finite_difference_check(loss, point, step, tolerance);
    if (r.max_rel_error > result.worst_rel_error)
      result.worst_rel_error = r.max_rel_error;
    if (!r.pass) result.pass = false;
  }
  return result;
}

// Gradient checks for all tensor primitives. Losses get their own cases in
// the objectives suite.
std::vector<SuiteCase> primitive_gradient_suite(int instances);

// Gradient checks for every training loss: the four HSC radial variants,
// BCE and focal (through a sigmoid head), DSVDD and DSAD.
std::vector<SuiteCase> loss_gradient_suite(int instances);

}  // namespace oebench::testsupport
