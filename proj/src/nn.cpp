#include "oebench/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace oebench::nn {

Tensor Conv2d::forward(Tape& tape, const Tensor& x, bool) {
  return tape.conv2d(x, weight_, bias_.defined() ? &bias_ : nullptr, pad_);
}

void Conv2d::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", weight_});
  if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
}

Tensor Linear::forward(Tape& tape, const Tensor& x, bool) {
  return tape.linear(x, weight_, bias_.defined() ? &bias_ : nullptr);
}

void Linear::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", weight_});
  if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma_(Tensor::full({channels}, 1.0, true)),
      beta_(Tensor::zeros({channels}, true)),
      running_mean_(channels, 0.0),
      running_var_(channels, 1.0) {}

Tensor BatchNorm::forward(Tape& tape, const Tensor& x, bool training) {
  return tape.batchnorm(x, gamma_, beta_, running_mean_, running_var_,
                        training, kBnMomentum, kBnEps);
}

void BatchNorm::collect(const std::string& prefix,
                        std::vector<NamedParam>& out) {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

void BatchNorm::collect_buffers(const std::string& prefix,
                                std::vector<NamedBuffer>& out) {
  out.push_back({prefix + ".running_mean", &running_mean_});
  out.push_back({prefix + ".running_var", &running_var_});
}

Tensor Activation::forward(Tape& tape, const Tensor& x, bool) {
  switch (kind_) {
    case ActKind::ReLU:
      return tape.relu(x);
    case ActKind::LeakyReLU:
      return tape.leaky_relu(x, kLeakySlope);
  }
  throw std::logic_error("unknown activation");
}

Tensor MaxPool2::forward(Tape& tape, const Tensor& x, bool) {
  return tape.maxpool2(x);
}

Tensor Flatten::forward(Tape& tape, const Tensor& x, bool) {
  std::size_t features = 1;
  for (std::size_t i = 1; i < x.rank(); ++i) features *= x.dim(i);
  return tape.reshape(x, {x.dim(0), features});
}

Tensor Network::forward(Tape& tape, const Tensor& batch) {
  Tensor h = batch;
  const bool training = mode_ == Mode::Train;
  for (auto& layer : layers_) h = layer->forward(tape, h, training);
  return h;
}

std::vector<NamedParam> Network::named_parameters() const {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect("layer" + std::to_string(i), out);
  return out;
}

std::vector<Tensor> Network::parameters() const {
  std::vector<Tensor> out;
  for (const auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

std::vector<NamedBuffer> Network::named_buffers() const {
  std::vector<NamedBuffer> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_buffers("layer" + std::to_string(i), out);
  return out;
}

Tensor ClassifierHead::forward_prob(Tape& tape, const Tensor& features) const {
  Tensor logits = tape.linear(features, weight_, &bias_);
  Tensor probs = tape.sigmoid(logits);
  return tape.reshape(probs, {features.dim(0)});
}

std::vector<NamedParam> ClassifierHead::named_parameters() const {
  return {{"head.weight", weight_}, {"head.bias", bias_}};
}

std::vector<Tensor> ClassifierHead::parameters() const {
  return {weight_, bias_};
}

namespace {

// Kaiming-uniform-style fan-in scaling; biases start at zero.
Tensor init_weight(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

std::unique_ptr<Conv2d> make_conv(std::size_t in_c, std::size_t out_c,
                                  std::size_t k, std::size_t pad,
                                  bool with_bias, std::mt19937_64& rng) {
  Tensor w = init_weight({out_c, in_c, k, k}, in_c * k * k, rng);
  Tensor b = with_bias ? Tensor::zeros({out_c}, true) : Tensor();
  return std::make_unique<Conv2d>(std::move(w), std::move(b), pad);
}

std::unique_ptr<Linear> make_linear(std::size_t in_f, std::size_t out_f,
                                    bool with_bias, std::mt19937_64& rng) {
  Tensor w = init_weight({out_f, in_f}, in_f, rng);
  Tensor b = with_bias ? Tensor::zeros({out_f}, true) : Tensor();
  return std::make_unique<Linear>(std::move(w), std::move(b));
}

struct ConvNetSpec {
  std::size_t in_channels;
  std::size_t in_hw;
  std::vector<std::size_t> conv_channels;
  std::size_t kernel;
  std::size_t pad;
  std::vector<std::size_t> fc_units;  // last entry is the feature dim r
};

Network build_conv_net(const ConvNetSpec& spec, std::uint64_t seed,
                       bool with_bias) {
  std::mt19937_64 rng(seed);
  Network net;
  std::size_t channels = spec.in_channels;
  std::size_t hw = spec.in_hw;
  for (std::size_t c : spec.conv_channels) {
    net.add(make_conv(channels, c, spec.kernel, spec.pad, with_bias, rng));
    net.add(std::make_unique<BatchNorm>(c));
    net.add(std::make_unique<Activation>(ActKind::LeakyReLU));
    net.add(std::make_unique<MaxPool2>());
    channels = c;
    hw /= 2;
  }
  net.add(std::make_unique<Flatten>());
  std::size_t features = channels * hw * hw;
  for (std::size_t i = 0; i + 1 < spec.fc_units.size(); ++i) {
    net.add(make_linear(features, spec.fc_units[i], with_bias, rng));
    net.add(std::make_unique<BatchNorm>(spec.fc_units[i]));
    net.add(std::make_unique<Activation>(ActKind::LeakyReLU));
    features = spec.fc_units[i];
  }
  net.add(make_linear(features, spec.fc_units.back(), with_bias, rng));
  net.set_output_dim(spec.fc_units.back());
  return net;
}

}  // namespace

Network build_mnist_net(std::uint64_t seed, bool with_bias) {
  return build_conv_net({1, 28, {16, 32}, 5, 2, {64, 32}}, seed, with_bias);
}

Network build_cifar_net(std::uint64_t seed, bool with_bias) {
  return build_conv_net({3, 32, {32, 64, 128}, 3, 1, {512, 256}}, seed,
                        with_bias);
}

Network build_synthetic_net(std::uint64_t seed, bool with_bias) {
  return build_conv_net({1, 32, {8, 16}, 3, 1, {32, 16}}, seed, with_bias);
}

Network build_toy_mlp(const std::vector<std::size_t>& hidden_dims,
                      std::uint64_t seed, bool with_bias, std::size_t out_dim) {
  std::mt19937_64 rng(seed);
  Network net;
  net.add(std::make_unique<Flatten>());  // accepts (B,2) or (B,1,1,2) alike
  std::size_t in = 2;
  for (std::size_t h : hidden_dims) {
    net.add(make_linear(in, h, with_bias, rng));
    net.add(std::make_unique<Activation>(ActKind::ReLU));
    in = h;
  }
  net.add(make_linear(in, out_dim, with_bias, rng));
  net.set_output_dim(out_dim);
  return net;
}

ClassifierHead build_head(std::size_t input_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = init_weight({1, input_dim}, input_dim, rng);
  Tensor b = Tensor::zeros({1}, true);
  return ClassifierHead(std::move(w), std::move(b));
}

Tensor forward_features(Network& net, Tape& tape, const Tensor& batch) {
  return net.forward(tape, batch);
}

Tensor forward_prob(Network& net, const ClassifierHead& head, Tape& tape,
                    const Tensor& batch) {
  return head.forward_prob(tape, net.forward(tape, batch));
}

// ---------------------------------------------------------------------------
// checkpoint format: "OEBN", u32 version, then per tensor:
// u32 name length, name bytes, u32 rank, u64 dims, little-endian f64 data
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'O', 'E', 'B', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_le<std::uint64_t>(os, bits);
}

template <typename T>
bool read_le(std::istream& is, T& v) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    acc |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  v = static_cast<T>(acc);
  return true;
}

bool read_f64(std::istream& is, double& v) {
  std::uint64_t bits;
  if (!read_le(is, bits)) return false;
  std::memcpy(&v, &bits, sizeof(v));
  return true;
}

void write_tensor(std::ostream& os, const std::string& name, const Shape& shape,
                  const std::vector<double>& data) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) write_le<std::uint64_t>(os, d);
  for (double v : data) write_f64(os, v);
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kVersion);
  for (const auto& p : net.named_parameters())
    write_tensor(os, p.name, p.tensor.shape(), p.tensor.data());
  for (const auto& b : net.named_buffers())
    write_tensor(os, b.name, {b.values->size()}, *b.values);
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_checkpoint(Network& net, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  std::uint32_t version;
  if (!read_le(is, version) || version != kVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);

  std::unordered_map<std::string, Tensor> params;
  for (const auto& p : net.named_parameters()) params.emplace(p.name, p.tensor);
  std::unordered_map<std::string, std::vector<double>*> buffers;
  for (const auto& b : net.named_buffers()) buffers.emplace(b.name, b.values);

  std::uint32_t name_len;
  while (read_le(is, name_len)) {
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw std::runtime_error("truncated checkpoint: " + path);
    std::uint32_t rank;
    if (!read_le(is, rank))
      throw std::runtime_error("truncated checkpoint: " + path);
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      std::uint64_t dim;
      if (!read_le(is, dim))
        throw std::runtime_error("truncated checkpoint: " + path);
      d = static_cast<std::size_t>(dim);
      n *= d;
    }
    std::vector<double> data(n);
    for (auto& v : data)
      if (!read_f64(is, v))
        throw std::runtime_error("truncated checkpoint: " + path);
    if (auto it = params.find(name); it != params.end()) {
      if (it->second.shape() != shape)
        throw std::runtime_error("checkpoint shape mismatch for " + name);
      it->second.data() = std::move(data);
    } else if (auto bit = buffers.find(name); bit != buffers.end()) {
      if (bit->second->size() != n)
        throw std::runtime_error("checkpoint shape mismatch for " + name);
      *bit->second = std::move(data);
    } else {
      throw std::runtime_error("checkpoint tensor " + name +
                               " not present in network");
    }
  }
}

}  // namespace oebench::nn
