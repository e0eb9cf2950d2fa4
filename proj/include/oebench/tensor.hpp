#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace oebench {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Thrown when operand shapes do not fit a primitive's signature.
class ShapeError : public std::runtime_error {
 public:
  ShapeError(const std::string& op, const std::string& detail)
      : std::runtime_error("shape error in " + op + ": " + detail) {}
};

/// Dense row-major f64 tensor. Handle semantics: copies share storage.
/// Gradient buffers are allocated lazily by the tape during backward().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar_value(double v);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t rank() const { return shape().size(); }

  // Shallow-const handle: data and grad buffers are shared state and stay
  // writable through const handles, like the pointee of a shared_ptr.
  std::vector<double>& data() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::vector<double>& grad() const;  // allocates zeros on first use
  void zero_grad() const;

  double item() const;  // size-1 tensors only

  /// Identity for storage, used by the tape to key gradient accumulation.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

namespace detail {
struct Node;
}

/// Records forward primitives and replays them in reverse for backward().
/// Every op result is a fresh tensor; gradients accumulate additively over
/// fan-out. One tape per training step; clear() drops the recorded graph.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // elementwise
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor add_scalar(const Tensor& a, double c);
  Tensor scale(const Tensor& a, double c);
  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);
  Tensor sqrt(const Tensor& a);
  Tensor pow(const Tensor& a, double exponent);
  Tensor sigmoid(const Tensor& a);
  Tensor relu(const Tensor& a);
  Tensor leaky_relu(const Tensor& a, double slope);
  /// Clamps to [lo, hi]; gradient is zero where the clamp engaged. If
  /// `saturations` is given it is incremented once per clamped element.
  Tensor clamp(const Tensor& a, double lo, double hi,
               long long* saturations = nullptr);

  // reductions
  Tensor sum(const Tensor& a);   // -> scalar
  Tensor mean(const Tensor& a);  // -> scalar
  /// Per-row reductions over a (B, r) tensor, result shape (B).
  Tensor rowwise_sqnorm(const Tensor& a);
  Tensor rowwise_l1(const Tensor& a);
  Tensor rowwise_l2(const Tensor& a);

  // shape
  Tensor reshape(const Tensor& a, Shape shape);
  /// (B, r) minus a broadcast (r) row vector.
  Tensor sub_rowvec(const Tensor& a, const Tensor& v);

  // neural-net primitives
  /// x: (B, in), w: (out, in), optional bias (out) -> (B, out)
  Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias);
  /// x: (B, C, H, W), w: (K, C, kh, kw), stride 1 -> (B, K, H', W')
  Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias,
                std::size_t pad);
  /// 2x2 stride-2 max pooling; ties routed to the first index in row-major
  /// order.
  Tensor maxpool2(const Tensor& x);
  /// Per-channel batch normalization over (B, F) or (B, C, H, W).
  /// In training mode batch statistics are used and running stats updated
  /// in place with `momentum`; in eval mode running stats are used.
  Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   std::vector<double>& running_mean,
                   std::vector<double>& running_var, bool training,
                   double momentum = 0.1, double eps = 1e-8);

  /// Reverse pass from a scalar loss. Populates grad of every requires_grad
  /// tensor reachable from the loss.
  void backward(const Tensor& loss);

  void clear();
  std::size_t num_ops() const { return nodes_.size(); }

 private:
  Tensor record(std::unique_ptr<detail::Node> node);
  std::vector<std::unique_ptr<detail::Node>> nodes_;
};

/// Result of comparing analytic against central-finite-difference gradients.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  bool finite = true;
  bool pass = false;
};

/// f maps a parameter tensor to a scalar loss built on the given tape.
/// Central differences with the given step; relative error uses
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport finite_difference_check(
    const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& point,
    double step, double tolerance);

}  // namespace oebench
