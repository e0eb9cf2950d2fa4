#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "oebench/tensor.hpp"

namespace oebench::nn {

constexpr double kLeakySlope = 0.01;
constexpr double kBnMomentum = 0.1;
constexpr double kBnEps = 1e-8;

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Named non-gradient state (batchnorm running statistics).
struct NamedBuffer {
  std::string name;
  std::vector<double>* values;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(Tape& tape, const Tensor& x, bool training) = 0;
  virtual void collect(const std::string& prefix, std::vector<NamedParam>& out) {}
  virtual void collect_buffers(const std::string& prefix,
                               std::vector<NamedBuffer>& out) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(Tensor weight, Tensor bias, std::size_t pad)
      : weight_(std::move(weight)), bias_(std::move(bias)), pad_(pad) {}
  Tensor forward(Tape& tape, const Tensor& x, bool) override;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) override;

 private:
  Tensor weight_, bias_;  // bias_ may be undefined
  std::size_t pad_;
};

class Linear : public Layer {
 public:
  Linear(Tensor weight, Tensor bias)
      : weight_(std::move(weight)), bias_(std::move(bias)) {}
  Tensor forward(Tape& tape, const Tensor& x, bool) override;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) override;

 private:
  Tensor weight_, bias_;
};

class BatchNorm : public Layer {
 public:
  explicit BatchNorm(std::size_t channels);
  Tensor forward(Tape& tape, const Tensor& x, bool training) override;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) override;
  void collect_buffers(const std::string& prefix,
                       std::vector<NamedBuffer>& out) override;

 private:
  Tensor gamma_, beta_;
  std::vector<double> running_mean_, running_var_;
};

enum class ActKind { ReLU, LeakyReLU };

class Activation : public Layer {
 public:
  explicit Activation(ActKind kind) : kind_(kind) {}
  Tensor forward(Tape& tape, const Tensor& x, bool) override;

 private:
  ActKind kind_;
};

class MaxPool2 : public Layer {
 public:
  Tensor forward(Tape& tape, const Tensor& x, bool) override;
};

class Flatten : public Layer {
 public:
  Tensor forward(Tape& tape, const Tensor& x, bool) override;
};

enum class Mode { Train, Eval };

/// Ordered layer stack mapping an input batch to (B, r) features.
class Network {
 public:
  Tensor forward(Tape& tape, const Tensor& batch);
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  void set_mode(Mode m) { mode_ = m; }
  Mode mode() const { return mode_; }
  std::size_t output_dim() const { return output_dim_; }
  void set_output_dim(std::size_t r) { output_dim_ = r; }

  std::vector<NamedParam> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::vector<NamedBuffer> named_buffers() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  Mode mode_ = Mode::Train;
  std::size_t output_dim_ = 0;
};

/// Linear r -> 1 followed by sigmoid; output in (0,1).
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(Tensor weight, Tensor bias)
      : weight_(std::move(weight)), bias_(std::move(bias)) {}
  /// features (B, r) -> probabilities (B,)
  Tensor forward_prob(Tape& tape, const Tensor& features) const;
  std::vector<NamedParam> named_parameters() const;
  std::vector<Tensor> parameters() const;

 private:
  Tensor weight_, bias_;
};

// LeNet-style reference builders. Kernel and pooling geometry are fixed
// constants: 5x5/pad 2 convs for the 28x28 net, 3x3/pad 1 for the 32x32
// nets, 2x2/stride-2 max pooling throughout.
Network build_mnist_net(std::uint64_t seed, bool with_bias = true);
Network build_cifar_net(std::uint64_t seed, bool with_bias = true);
/// Small net for the 1x32x32 synthetic benchmark: convs 8-16, fc 32-16.
Network build_synthetic_net(std::uint64_t seed, bool with_bias = true);
/// 2 -> hidden... -> out_dim MLP with ReLU for the 2D toy study. A feature
/// dimension well above 2 keeps the far field away from accidental zeros of
/// the feature map, which would read as spurious nominal pockets.
Network build_toy_mlp(const std::vector<std::size_t>& hidden_dims,
                      std::uint64_t seed, bool with_bias = true,
                      std::size_t out_dim = 2);

ClassifierHead build_head(std::size_t input_dim, std::uint64_t seed);

Tensor forward_features(Network& net, Tape& tape, const Tensor& batch);
Tensor forward_prob(Network& net, const ClassifierHead& head, Tape& tape,
                    const Tensor& batch);

/// Versioned binary parameter checkpoint ("OEBN"); includes batchnorm
/// running statistics as named tensors.
void save_checkpoint(const Network& net, const std::string& path);
/// Loads by name into an already-built network of the same architecture.
void load_checkpoint(Network& net, const std::string& path);

}  // namespace oebench::nn
