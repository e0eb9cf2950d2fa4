#include "oebench/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

namespace oebench {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ")";
  return os.str();
}

namespace {
std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}
}  // namespace

struct Tensor::Impl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
};

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(shape, std::vector<double>(numel(shape), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return from(shape, std::vector<double>(numel(shape), value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size())
    throw ShapeError("Tensor::from", "shape " + shape_str(shape) +
                                         " does not match data length " +
                                         std::to_string(data.size()));
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(data);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar_value(double v) { return from({1}, {v}); }

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }
std::vector<double>& Tensor::data() const { return impl_->data; }
bool Tensor::requires_grad() const { return impl_->requires_grad; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const { impl_->grad.clear(); }

double Tensor::item() const {
  if (size() != 1)
    throw ShapeError("Tensor::item",
                     "expected scalar, got " + shape_str(shape()));
  return impl_->data[0];
}

namespace detail {
struct Node {
  Tensor out;
  std::function<void()> back;
};
}  // namespace detail

Tape::Tape() = default;
Tape::~Tape() = default;

void Tape::clear() { nodes_.clear(); }

Tensor Tape::record(std::unique_ptr<detail::Node> node) {
  Tensor out = node->out;
  nodes_.push_back(std::move(node));
  return out;
}

namespace {

using detail::Node;

std::unique_ptr<Node> make_node(Tensor out, std::function<void()> back) {
  auto n = std::make_unique<Node>();
  n->out = std::move(out);
  n->back = std::move(back);
  return n;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(op, "operand shapes " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

// C(M,N) += A(M,K) * B(K,N), row-major.
void gemm(const double* A, const double* B, double* C, std::size_t M,
          std::size_t K, std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    double* Ci = C + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double a = A[i * K + k];
      const double* Bk = B + k * N;
      for (std::size_t j = 0; j < N; ++j) Ci[j] += a * Bk[j];
    }
  }
}

}  // namespace

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward",
                     "loss must be scalar, got " + shape_str(loss.shape()));
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!(*it)->out.has_grad()) continue;
    (*it)->back();
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, b, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  }));
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] - b.data()[i];
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, b, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  }));
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, b, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * b.data()[i];
      gb[i] += g[i] * a.data()[i];
    }
  }));
}

Tensor Tape::add_scalar(const Tensor& a, double c) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + c;
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  }));
}

Tensor Tape::scale(const Tensor& a, double c) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * c;
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out, c]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  }));
}

Tensor Tape::exp(const Tensor& a) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(a.data()[i]);
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * out.data()[i];
  }));
}

Tensor Tape::log(const Tensor& a) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::log(a.data()[i]);
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a.data()[i];
  }));
}

Tensor Tape::sqrt(const Tensor& a) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sqrt(a.data()[i]);
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[i] += g[i] * 0.5 / out.data()[i];
  }));
}

Tensor Tape::pow(const Tensor& a, double exponent) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = std::pow(a.data()[i], exponent);
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out, exponent]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[i] += g[i] * exponent * std::pow(a.data()[i], exponent - 1.0);
  }));
}

Tensor Tape::sigmoid(const Tensor& a) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = a.data()[i];
    y[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  }
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = out.data()[i];
      ga[i] += g[i] * s * (1.0 - s);
    }
  }));
}

Tensor Tape::relu(const Tensor& a) { return leaky_relu(a, 0.0); }

Tensor Tape::leaky_relu(const Tensor& a, double slope) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = a.data()[i];
    y[i] = x > 0.0 ? x : slope * x;
  }
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out, slope]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[i] += g[i] * (a.data()[i] > 0.0 ? 1.0 : slope);
  }));
}

Tensor Tape::clamp(const Tensor& a, double lo, double hi,
                   long long* saturations) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = a.data()[i];
    y[i] = std::min(std::max(x, lo), hi);
    if ((x < lo || x > hi) && saturations) ++*saturations;
  }
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, out, lo, hi]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = a.data()[i];
      if (x >= lo && x <= hi) ga[i] += g[i];
    }
  }));
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor Tape::sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::from({1}, {s});
  return record(make_node(out, [a, out]() mutable {
    const double g = out.grad()[0];
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  }));
}

Tensor Tape::mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double n = static_cast<double>(a.size());
  Tensor out = Tensor::from({1}, {s / n});
  return record(make_node(out, [a, out, n]() mutable {
    const double g = out.grad()[0] / n;
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  }));
}

namespace {
void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2)
    throw ShapeError(op, "expected rank-2 input, got " + shape_str(a.shape()));
}
}  // namespace

Tensor Tape::rowwise_sqnorm(const Tensor& a) {
  require_matrix("rowwise_sqnorm", a);
  const std::size_t B = a.dim(0), r = a.dim(1);
  std::vector<double> y(B, 0.0);
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      const double v = a.data()[i * r + j];
      y[i] += v * v;
    }
  Tensor out = Tensor::from({B}, std::move(y));
  return record(make_node(out, [a, out, B, r]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < r; ++j)
        ga[i * r + j] += g[i] * 2.0 * a.data()[i * r + j];
  }));
}

Tensor Tape::rowwise_l1(const Tensor& a) {
  require_matrix("rowwise_l1", a);
  const std::size_t B = a.dim(0), r = a.dim(1);
  std::vector<double> y(B, 0.0);
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < r; ++j) y[i] += std::abs(a.data()[i * r + j]);
  Tensor out = Tensor::from({B}, std::move(y));
  return record(make_node(out, [a, out, B, r]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const double v = a.data()[i * r + j];
        ga[i * r + j] += g[i] * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
      }
  }));
}

Tensor Tape::rowwise_l2(const Tensor& a) {
  require_matrix("rowwise_l2", a);
  const std::size_t B = a.dim(0), r = a.dim(1);
  std::vector<double> y(B, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double v = a.data()[i * r + j];
      s += v * v;
    }
    y[i] = std::sqrt(s);
  }
  Tensor out = Tensor::from({B}, std::move(y));
  return record(make_node(out, [a, out, B, r]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < B; ++i) {
      const double norm = out.data()[i];
      if (norm == 0.0) continue;  // subgradient 0 at the origin
      for (std::size_t j = 0; j < r; ++j)
        ga[i * r + j] += g[i] * a.data()[i * r + j] / norm;
    }
  }));
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape", "cannot reshape " + shape_str(a.shape()) +
                                    " to " + shape_str(shape));
  Tensor out = Tensor::from(std::move(shape), a.data());
  return record(make_node(out, [a, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  }));
}

Tensor Tape::sub_rowvec(const Tensor& a, const Tensor& v) {
  require_matrix("sub_rowvec", a);
  const std::size_t B = a.dim(0), r = a.dim(1);
  if (v.size() != r)
    throw ShapeError("sub_rowvec", "matrix " + shape_str(a.shape()) +
                                       " vs row vector " +
                                       shape_str(v.shape()));
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < r; ++j)
      y[i * r + j] = a.data()[i * r + j] - v.data()[j];
  Tensor out = Tensor::from(a.shape(), std::move(y));
  return record(make_node(out, [a, v, out, B, r]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    auto& gv = v.grad();
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        ga[i * r + j] += g[i * r + j];
        gv[j] -= g[i * r + j];
      }
  }));
}

// ---------------------------------------------------------------------------
// neural-net primitives
// ---------------------------------------------------------------------------

Tensor Tape::linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
  require_matrix("linear", x);
  require_matrix("linear", w);
  const std::size_t B = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  if (w.dim(1) != in)
    throw ShapeError("linear", "input " + shape_str(x.shape()) + " vs weight " +
                                   shape_str(w.shape()));
  if (bias && bias->size() != out_dim)
    throw ShapeError("linear", "bias " + shape_str(bias->shape()) +
                                   " vs weight " + shape_str(w.shape()));
  std::vector<double> y(B * out_dim, 0.0);
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t o = 0; o < out_dim; ++o) {
      double s = bias ? bias->data()[o] : 0.0;
      const double* xi = x.data().data() + i * in;
      const double* wo = w.data().data() + o * in;
      for (std::size_t k = 0; k < in; ++k) s += xi[k] * wo[k];
      y[i * out_dim + o] = s;
    }
  Tensor out = Tensor::from({B, out_dim}, std::move(y));
  Tensor b = bias ? *bias : Tensor();
  return record(make_node(out, [x, w, b, out, B, in, out_dim]() mutable {
    const auto& g = out.grad();
    auto& gx = x.grad();
    auto& gw = w.grad();
    for (std::size_t i = 0; i < B; ++i) {
      const double* gi = g.data() + i * out_dim;
      const double* xi = x.data().data() + i * in;
      double* gxi = gx.data() + i * in;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double go = gi[o];
        const double* wo = w.data().data() + o * in;
        double* gwo = gw.data() + o * in;
        for (std::size_t k = 0; k < in; ++k) {
          gxi[k] += go * wo[k];
          gwo[k] += go * xi[k];
        }
      }
    }
    if (b.defined()) {
      auto& gb = b.grad();
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t o = 0; o < out_dim; ++o)
          gb[o] += g[i * out_dim + o];
    }
  }));
}

namespace {

struct ConvDims {
  std::size_t B, C, H, W, K, kh, kw, OH, OW, ckk, n;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, std::size_t pad) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv2d", "input " + shape_str(x.shape()) + " kernel " +
                                   shape_str(w.shape()));
  ConvDims d;
  d.B = x.dim(0);
  d.C = x.dim(1);
  d.H = x.dim(2);
  d.W = x.dim(3);
  d.K = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  if (w.dim(1) != d.C)
    throw ShapeError("conv2d", "input channels " + shape_str(x.shape()) +
                                   " vs kernel " + shape_str(w.shape()));
  if (d.H + 2 * pad < d.kh || d.W + 2 * pad < d.kw)
    throw ShapeError("conv2d", "kernel " + shape_str(w.shape()) +
                                   " larger than padded input " +
                                   shape_str(x.shape()));
  d.OH = d.H + 2 * pad - d.kh + 1;
  d.OW = d.W + 2 * pad - d.kw + 1;
  d.ckk = d.C * d.kh * d.kw;
  d.n = d.OH * d.OW;
  return d;
}

// col: (C*kh*kw, OH*OW) for one sample.
void im2col(const double* x, const ConvDims& d, std::size_t pad, double* col) {
  for (std::size_t c = 0; c < d.C; ++c)
    for (std::size_t ki = 0; ki < d.kh; ++ki)
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        double* row = col + ((c * d.kh + ki) * d.kw + kj) * d.n;
        for (std::size_t oi = 0; oi < d.OH; ++oi) {
          const long long si = static_cast<long long>(oi + ki) -
                               static_cast<long long>(pad);
          for (std::size_t oj = 0; oj < d.OW; ++oj) {
            const long long sj = static_cast<long long>(oj + kj) -
                                 static_cast<long long>(pad);
            row[oi * d.OW + oj] =
                (si >= 0 && si < static_cast<long long>(d.H) && sj >= 0 &&
                 sj < static_cast<long long>(d.W))
                    ? x[(c * d.H + si) * d.W + sj]
                    : 0.0;
          }
        }
      }
}

void col2im_acc(const double* col, const ConvDims& d, std::size_t pad,
                double* gx) {
  for (std::size_t c = 0; c < d.C; ++c)
    for (std::size_t ki = 0; ki < d.kh; ++ki)
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        const double* row = col + ((c * d.kh + ki) * d.kw + kj) * d.n;
        for (std::size_t oi = 0; oi < d.OH; ++oi) {
          const long long si = static_cast<long long>(oi + ki) -
                               static_cast<long long>(pad);
          if (si < 0 || si >= static_cast<long long>(d.H)) continue;
          for (std::size_t oj = 0; oj < d.OW; ++oj) {
            const long long sj = static_cast<long long>(oj + kj) -
                                 static_cast<long long>(pad);
            if (sj < 0 || sj >= static_cast<long long>(d.W)) continue;
            gx[(c * d.H + si) * d.W + sj] += row[oi * d.OW + oj];
          }
        }
      }
}

}  // namespace

Tensor Tape::conv2d(const Tensor& x, const Tensor& w, const Tensor* bias,
                    std::size_t pad) {
  const ConvDims d = conv_dims(x, w, pad);
  if (bias && bias->size() != d.K)
    throw ShapeError("conv2d", "bias " + shape_str(bias->shape()) +
                                   " vs kernel " + shape_str(w.shape()));
  std::vector<double> y(d.B * d.K * d.n, 0.0);
  std::vector<double> col(d.ckk * d.n);
  for (std::size_t b = 0; b < d.B; ++b) {
    im2col(x.data().data() + b * d.C * d.H * d.W, d, pad, col.data());
    double* yb = y.data() + b * d.K * d.n;
    gemm(w.data().data(), col.data(), yb, d.K, d.ckk, d.n);
    if (bias)
      for (std::size_t k = 0; k < d.K; ++k)
        for (std::size_t i = 0; i < d.n; ++i) yb[k * d.n + i] += bias->data()[k];
  }
  Tensor out = Tensor::from({d.B, d.K, d.OH, d.OW}, std::move(y));
  Tensor b = bias ? *bias : Tensor();
  return record(make_node(out, [x, w, b, out, d, pad]() mutable {
    const auto& g = out.grad();
    auto& gx = x.grad();
    auto& gw = w.grad();
    std::vector<double> col(d.ckk * d.n);
    std::vector<double> gcol(d.ckk * d.n);
    for (std::size_t s = 0; s < d.B; ++s) {
      const double* gs = g.data() + s * d.K * d.n;
      im2col(x.data().data() + s * d.C * d.H * d.W, d, pad, col.data());
      // gw += gs * col^T
      for (std::size_t k = 0; k < d.K; ++k)
        for (std::size_t c = 0; c < d.ckk; ++c) {
          double acc = 0.0;
          const double* gk = gs + k * d.n;
          const double* cc = col.data() + c * d.n;
          for (std::size_t i = 0; i < d.n; ++i) acc += gk[i] * cc[i];
          gw[k * d.ckk + c] += acc;
        }
      // gcol = w^T * gs
      std::fill(gcol.begin(), gcol.end(), 0.0);
      for (std::size_t k = 0; k < d.K; ++k) {
        const double* gk = gs + k * d.n;
        for (std::size_t c = 0; c < d.ckk; ++c) {
          const double wv = w.data()[k * d.ckk + c];
          double* gc = gcol.data() + c * d.n;
          for (std::size_t i = 0; i < d.n; ++i) gc[i] += wv * gk[i];
        }
      }
      col2im_acc(gcol.data(), d, pad, gx.data() + s * d.C * d.H * d.W);
    }
    if (b.defined()) {
      auto& gb = b.grad();
      for (std::size_t s = 0; s < d.B; ++s)
        for (std::size_t k = 0; k < d.K; ++k) {
          const double* gk = g.data() + (s * d.K + k) * d.n;
          for (std::size_t i = 0; i < d.n; ++i) gb[k] += gk[i];
        }
    }
  }));
}

Tensor Tape::maxpool2(const Tensor& x) {
  if (x.rank() != 4)
    throw ShapeError("maxpool2",
                     "expected rank-4 input, got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t OH = H / 2, OW = W / 2;
  if (OH == 0 || OW == 0)
    throw ShapeError("maxpool2", "input too small " + shape_str(x.shape()));
  std::vector<double> y(B * C * OH * OW);
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* plane = x.data().data() + bc * H * W;
    for (std::size_t oi = 0; oi < OH; ++oi)
      for (std::size_t oj = 0; oj < OW; ++oj) {
        std::size_t best = (2 * oi) * W + 2 * oj;
        double bv = plane[best];
        const std::size_t cand[3] = {(2 * oi) * W + 2 * oj + 1,
                                     (2 * oi + 1) * W + 2 * oj,
                                     (2 * oi + 1) * W + 2 * oj + 1};
        for (std::size_t idx : cand)
          if (plane[idx] > bv) {  // strict: ties go to the first index
            bv = plane[idx];
            best = idx;
          }
        const std::size_t o = bc * OH * OW + oi * OW + oj;
        y[o] = bv;
        (*argmax)[o] = bc * H * W + best;
      }
  }
  Tensor out = Tensor::from({B, C, OH, OW}, std::move(y));
  return record(make_node(out, [x, out, argmax]() mutable {
    const auto& g = out.grad();
    auto& gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
  }));
}

Tensor Tape::batchnorm(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, std::vector<double>& running_mean,
                       std::vector<double>& running_var, bool training,
                       double momentum, double eps) {
  if (x.rank() != 2 && x.rank() != 4)
    throw ShapeError("batchnorm",
                     "expected rank-2 or rank-4 input, got " +
                         shape_str(x.shape()));
  const std::size_t B = x.dim(0), C = x.dim(1);
  const std::size_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (gamma.size() != C || beta.size() != C || running_mean.size() != C ||
      running_var.size() != C)
    throw ShapeError("batchnorm", "parameter size mismatch for input " +
                                      shape_str(x.shape()));
  const double m = static_cast<double>(B * spatial);
  auto at = [C, spatial](std::size_t b, std::size_t c, std::size_t s) {
    return (b * C + c) * spatial + s;
  };

  std::vector<double> mean(C, 0.0), invstd(C, 0.0);
  if (training) {
    for (std::size_t c = 0; c < C; ++c) {
      double mu = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < spatial; ++s) mu += x.data()[at(b, c, s)];
      mu /= m;
      double var = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < spatial; ++s) {
          const double d = x.data()[at(b, c, s)] - mu;
          var += d * d;
        }
      var /= m;  // biased batch variance
      mean[c] = mu;
      invstd[c] = 1.0 / std::sqrt(var + eps);
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu;
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      invstd[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> y(x.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = at(b, c, s);
        (*xhat)[i] = (x.data()[i] - mean[c]) * invstd[c];
        y[i] = gamma.data()[c] * (*xhat)[i] + beta.data()[c];
      }
  Tensor out = Tensor::from(x.shape(), std::move(y));
  auto saved_invstd = std::make_shared<std::vector<double>>(std::move(invstd));
  return record(make_node(
      out, [x, gamma, beta, out, xhat, saved_invstd, B, C, spatial, m,
            training, at]() mutable {
        const auto& g = out.grad();
        auto& gx = x.grad();
        auto& ggamma = gamma.grad();
        auto& gbeta = beta.grad();
        for (std::size_t c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_g_xhat = 0.0;
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t s = 0; s < spatial; ++s) {
              const std::size_t i = at(b, c, s);
              sum_g += g[i];
              sum_g_xhat += g[i] * (*xhat)[i];
            }
          ggamma[c] += sum_g_xhat;
          gbeta[c] += sum_g;
          const double k = gamma.data()[c] * (*saved_invstd)[c];
          if (training) {
            // full derivative through the batch mean and variance
            for (std::size_t b = 0; b < B; ++b)
              for (std::size_t s = 0; s < spatial; ++s) {
                const std::size_t i = at(b, c, s);
                gx[i] += k / m * (m * g[i] - sum_g - (*xhat)[i] * sum_g_xhat);
              }
          } else {
            for (std::size_t b = 0; b < B; ++b)
              for (std::size_t s = 0; s < spatial; ++s) {
                const std::size_t i = at(b, c, s);
                gx[i] += k * g[i];
              }
          }
        }
      }));
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

GradCheckReport finite_difference_check(
    const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& point,
    double step, double tolerance) {
  GradCheckReport report;
  Tensor p = Tensor::from(point.shape(), point.data(), true);

  Tape tape;
  Tensor loss = f(tape, p);
  tape.backward(loss);
  std::vector<double> analytic = p.grad();

  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p.data()[i];
    p.data()[i] = saved + step;
    Tape tp;
    const double fp = f(tp, p).item();
    p.data()[i] = saved - step;
    Tape tm;
    const double fm = f(tm, p).item();
    p.data()[i] = saved;
    const double numeric = (fp - fm) / (2.0 * step);
    if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
      report.finite = false;
      report.worst_coordinate = i;
      report.max_rel_error = std::numeric_limits<double>::infinity();
      report.pass = false;
      return report;
    }
    const double denom =
        std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
    }
  }
  report.pass = report.finite && report.max_rel_error <= tolerance;
  return report;
}

}  // namespace oebench
