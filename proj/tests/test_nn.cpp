#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oebench/nn.hpp"
#include "support/gradient_suite.hpp"

using namespace oebench;
using testsupport::random_tensor;

namespace {

std::size_t total_params(const nn::Network& net) {
  std::size_t n = 0;
  for (const auto& p : net.named_parameters()) n += p.tensor.size();
  return n;
}

}  // namespace

TEST_CASE("mnist net maps 8x1x28x28 to 8x32") {
  auto net = nn::build_mnist_net(1);
  std::mt19937_64 rng(3);
  Tape tape;
  Tensor out = net.forward(tape, random_tensor({8, 1, 28, 28}, rng, 0.0, 1.0));
  CHECK(out.shape() == Shape{8, 32});
}

TEST_CASE("mnist net parameter count matches the frozen architecture") {
  // by hand: conv 16x1x5x5+16, bn 2*16, conv 32x16x5x5+32, bn 2*32,
  // fc 64x1568+64, bn 2*64, fc 32x64+32
  CHECK(total_params(nn::build_mnist_net(0)) == 115968);
  // without conv/linear biases: 16 + 32 + 64 + 32 fewer
  CHECK(total_params(nn::build_mnist_net(0, false)) == 115968 - 144);
}

TEST_CASE("zeroed weights give all-zero features") {
  auto net = nn::build_mnist_net(2);
  for (auto& p : net.named_parameters())
    if (p.name.find("gamma") == std::string::npos)
      std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);
  std::mt19937_64 rng(4);
  Tape tape;
  Tensor out = net.forward(tape, random_tensor({2, 1, 28, 28}, rng, 0.0, 1.0));
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("cifar net maps 4x3x32x32 to 4x256") {
  auto net = nn::build_cifar_net(1);
  std::mt19937_64 rng(5);
  Tape tape;
  Tensor out = net.forward(tape, random_tensor({4, 3, 32, 32}, rng, 0.0, 1.0));
  CHECK(out.shape() == Shape{4, 256});
}

TEST_CASE("same seed builds identical parameters") {
  auto a = nn::build_cifar_net(42);
  auto b = nn::build_cifar_net(42);
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i].tensor.data() == pb[i].tensor.data());
}

TEST_CASE("eval-mode forward is pure and bitwise repeatable") {
  auto net = nn::build_mnist_net(7);
  net.set_mode(nn::Mode::Eval);
  std::mt19937_64 rng(6);
  Tensor batch = random_tensor({3, 1, 28, 28}, rng, 0.0, 1.0);
  Tape t1, t2;
  Tensor o1 = net.forward(t1, batch);
  Tensor o2 = net.forward(t2, batch);
  CHECK(o1.data() == o2.data());
}

TEST_CASE("duplicated rows produce duplicated outputs in eval mode") {
  auto net = nn::build_synthetic_net(9);
  net.set_mode(nn::Mode::Eval);
  std::mt19937_64 rng(8);
  Tensor row = random_tensor({1, 1, 32, 32}, rng, 0.0, 1.0);
  std::vector<double> two = row.data();
  two.insert(two.end(), row.data().begin(), row.data().end());
  Tape tape;
  Tensor out = net.forward(tape, Tensor::from({2, 1, 32, 32}, two));
  const std::size_t r = net.output_dim();
  for (std::size_t j = 0; j < r; ++j)
    CHECK(out.data()[j] == out.data()[r + j]);
}

TEST_CASE("toy mlp shapes and constant-score degenerate case") {
  auto net = nn::build_toy_mlp({32, 32}, 11);
  Tape tape;
  Tensor f = net.forward(tape, Tensor::from({1, 2}, {0.3, -0.7}));
  CHECK(f.shape() == Shape{1, 2});

  // a 100-point batch of grid points scores in one forward pass
  std::vector<double> grid;
  for (int i = 0; i < 100; ++i) {
    grid.push_back(-5.0 + 0.1 * i);
    grid.push_back(0.0);
  }
  Tape t2;
  Tensor features = net.forward(t2, Tensor::from({100, 2}, grid));
  CHECK(features.shape() == Shape{100, 2});

  // zero final layer -> constant feature vector -> constant score
  auto params = net.named_parameters();
  for (auto& p : params)
    if (p.name.rfind("layer5", 0) == 0)
      std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);
  Tape t3;
  Tensor f3 = net.forward(t3, Tensor::from({100, 2}, grid));
  for (double v : f3.data()) CHECK(v == 0.0);
}

TEST_CASE("head with zero weights outputs probability one half") {
  auto net = nn::build_synthetic_net(13);
  auto head = nn::build_head(net.output_dim(), 13);
  for (auto& p : head.named_parameters())
    std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);
  std::mt19937_64 rng(10);
  Tape tape;
  Tensor probs =
      nn::forward_prob(net, head, tape, random_tensor({3, 1, 32, 32}, rng, 0.0, 1.0));
  CHECK(probs.shape() == Shape{3});
  for (double p : probs.data()) CHECK(p == doctest::Approx(0.5));
}

TEST_CASE("probabilities stay strictly inside (0,1)") {
  auto net = nn::build_synthetic_net(17);
  auto head = nn::build_head(net.output_dim(), 18);
  std::mt19937_64 rng(12);
  Tape tape;
  Tensor probs =
      nn::forward_prob(net, head, tape, random_tensor({5, 1, 32, 32}, rng, 0.0, 1.0));
  for (double p : probs.data()) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("checkpoint round trip restores parameters bitwise") {
  const std::string path = "test_checkpoint.oebn";
  auto net = nn::build_synthetic_net(21);
  // push running stats away from the defaults so buffers are exercised
  std::mt19937_64 rng(14);
  {
    Tape tape;
    net.forward(tape, random_tensor({4, 1, 32, 32}, rng, 0.0, 1.0));
  }
  nn::save_checkpoint(net, path);
  std::vector<std::vector<double>> saved;
  for (const auto& p : net.named_parameters()) saved.push_back(p.tensor.data());
  std::vector<std::vector<double>> saved_buffers;
  for (const auto& b : net.named_buffers()) saved_buffers.push_back(*b.values);

  auto other = nn::build_synthetic_net(99);
  nn::load_checkpoint(other, path);
  auto params = other.named_parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(params[i].tensor.data() == saved[i]);
  auto buffers = other.named_buffers();
  for (std::size_t i = 0; i < buffers.size(); ++i)
    CHECK(*buffers[i].values == saved_buffers[i]);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint with wrong magic is rejected") {
  const std::string path = "test_checkpoint_bad.oebn";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE1234";
  }
  auto net = nn::build_toy_mlp({8}, 1);
  CHECK_THROWS_WITH_AS(nn::load_checkpoint(net, path),
                       doctest::Contains("magic"), std::runtime_error);
  std::remove(path.c_str());
}
