#include "support/gradient_suite.hpp"

#include <cmath>

#include "oebench/objectives.hpp"

namespace oebench::testsupport {

std::vector<SuiteCase> primitive_gradient_suite(int instances) {
  std::vector<SuiteCase> cases;
  auto run = [&](const std::string& name,
                 const std::function<Tensor(std::mt19937_64&)>& point,
                 const PointLoss& loss) {
    cases.push_back(check_gradients(name, instances, point, loss));
  };

  auto vec8 = [](std::mt19937_64& rng) { return random_tensor({8}, rng); };
  auto mat = [](std::mt19937_64& rng) { return random_tensor({3, 5}, rng); };
  auto pos8 = [](std::mt19937_64& rng) {
    return random_tensor({8}, rng, 0.1, 3.0);
  };

  run("add", vec8, [](Tape& t, const Tensor& x) {
    Tensor other = Tensor::full(x.shape(), 0.7);
    return t.sum(t.add(x, other));
  });
  run("sub", vec8, [](Tape& t, const Tensor& x) {
    Tensor other = Tensor::full(x.shape(), 0.3);
    return t.sum(t.mul(t.sub(x, other), t.sub(x, other)));
  });
  run("mul", vec8, [](Tape& t, const Tensor& x) {
    return t.sum(t.mul(x, x));
  });
  run("add_scalar", vec8, [](Tape& t, const Tensor& x) {
    return t.sum(t.mul(t.add_scalar(x, 1.5), x));
  });
  run("scale", vec8, [](Tape& t, const Tensor& x) {
    return t.sum(t.mul(t.scale(x, -2.5), x));
  });
  run("exp", vec8,
      [](Tape& t, const Tensor& x) { return t.sum(t.exp(x)); });
  run("log", pos8,
      [](Tape& t, const Tensor& x) { return t.sum(t.log(x)); });
  run("sqrt", pos8,
      [](Tape& t, const Tensor& x) { return t.sum(t.sqrt(x)); });
  run("pow", pos8,
      [](Tape& t, const Tensor& x) { return t.sum(t.pow(x, 1.7)); });
  run("sigmoid", vec8,
      [](Tape& t, const Tensor& x) { return t.sum(t.sigmoid(x)); });
  run("relu",
      [](std::mt19937_64& rng) {
        Tensor x = random_tensor({8}, rng);
        push_off_kinks(x);
        return x;
      },
      [](Tape& t, const Tensor& x) { return t.sum(t.relu(x)); });
  run("leaky_relu",
      [](std::mt19937_64& rng) {
        Tensor x = random_tensor({8}, rng);
        push_off_kinks(x);
        return x;
      },
      [](Tape& t, const Tensor& x) {
        return t.sum(t.leaky_relu(x, 0.01));
      });
  run("clamp",
      [](std::mt19937_64& rng) {
        Tensor x = random_tensor({8}, rng);
        // keep away from the clamp edges at +-1
        for (auto& v : x.data())
          if (std::abs(std::abs(v) - 1.0) < 1e-2) v *= 1.05;
        return x;
      },
      [](Tape& t, const Tensor& x) {
        return t.sum(t.mul(t.clamp(x, -1.0, 1.0), x));
      });
  run("sum", vec8, [](Tape& t, const Tensor& x) { return t.sum(x); });
  run("mean", vec8, [](Tape& t, const Tensor& x) { return t.mean(x); });
  run("rowwise_sqnorm", mat, [](Tape& t, const Tensor& x) {
    return t.sum(t.rowwise_sqnorm(x));
  });
  run("rowwise_l1",
      [](std::mt19937_64& rng) {
        Tensor x = random_tensor({3, 5}, rng);
        push_off_kinks(x);
        return x;
      },
      [](Tape& t, const Tensor& x) { return t.sum(t.rowwise_l1(x)); });
  run("rowwise_l2", mat, [](Tape& t, const Tensor& x) {
    return t.sum(t.rowwise_l2(x));
  });
  run("reshape", mat, [](Tape& t, const Tensor& x) {
    Tensor r = t.reshape(x, {5, 3});
    return t.sum(t.mul(r, r));
  });
  run("sub_rowvec", mat, [](Tape& t, const Tensor& x) {
    Tensor v = Tensor::from({5}, {0.1, -0.2, 0.3, -0.4, 0.5});
    Tensor d = t.sub_rowvec(x, v);
    return t.sum(t.mul(d, d));
  });
  run("linear_input", [](std::mt19937_64& rng) { return random_tensor({2, 6}, rng); },
      [](Tape& t, const Tensor& x) {
        std::mt19937_64 wrng(7);
        Tensor w = random_tensor({4, 6}, wrng);
        Tensor b = random_tensor({4}, wrng);
        return t.sum(t.mul(t.linear(x, w, &b), t.linear(x, w, &b)));
      });
  run("linear_weight",
      [](std::mt19937_64& rng) { return random_tensor({4, 6}, rng); },
      [](Tape& t, const Tensor& w) {
        std::mt19937_64 xrng(11);
        Tensor x = random_tensor({2, 6}, xrng);
        Tensor b = random_tensor({4}, xrng);
        Tensor y = t.linear(x, w, &b);
        return t.sum(t.mul(y, y));
      });
  run("linear_bias",
      [](std::mt19937_64& rng) { return random_tensor({4}, rng); },
      [](Tape& t, const Tensor& b) {
        std::mt19937_64 xrng(13);
        Tensor x = random_tensor({2, 6}, xrng);
        Tensor w = random_tensor({4, 6}, xrng);
        Tensor y = t.linear(x, w, &b);
        return t.sum(t.mul(y, y));
      });
  run("conv2d_input",
      [](std::mt19937_64& rng) { return random_tensor({2, 2, 5, 5}, rng); },
      [](Tape& t, const Tensor& x) {
        std::mt19937_64 wrng(17);
        Tensor w = random_tensor({3, 2, 3, 3}, wrng);
        Tensor b = random_tensor({3}, wrng);
        Tensor y = t.conv2d(x, w, &b, 1);
        return t.sum(t.mul(y, y));
      });
  run("conv2d_weight",
      [](std::mt19937_64& rng) { return random_tensor({3, 2, 3, 3}, rng); },
      [](Tape& t, const Tensor& w) {
        std::mt19937_64 xrng(19);
        Tensor x = random_tensor({2, 2, 5, 5}, xrng);
        Tensor b = random_tensor({3}, xrng);
        Tensor y = t.conv2d(x, w, &b, 1);
        return t.sum(t.mul(y, y));
      });
  run("conv2d_bias",
      [](std::mt19937_64& rng) { return random_tensor({3}, rng); },
      [](Tape& t, const Tensor& b) {
        std::mt19937_64 xrng(23);
        Tensor x = random_tensor({2, 2, 5, 5}, xrng);
        Tensor w = random_tensor({3, 2, 3, 3}, xrng);
        Tensor y = t.conv2d(x, w, &b, 1);
        return t.sum(t.mul(y, y));
      });
  run("maxpool2",
      [](std::mt19937_64& rng) {
        Tensor x = random_tensor({2, 2, 4, 4}, rng);
        break_pool_ties(x);
        return x;
      },
      [](Tape& t, const Tensor& x) {
        Tensor y = t.maxpool2(x);
        return t.sum(t.mul(y, y));
      });
  run("batchnorm_train_input",
      [](std::mt19937_64& rng) { return random_tensor({6, 3}, rng); },
      [](Tape& t, const Tensor& x) {
        Tensor gamma = Tensor::from({3}, {1.2, 0.8, 1.0});
        Tensor beta = Tensor::from({3}, {0.1, -0.2, 0.0});
        std::vector<double> rm(3, 0.0), rv(3, 1.0);
        Tensor y = t.batchnorm(x, gamma, beta, rm, rv, true);
        return t.sum(t.mul(y, y));
      });
  run("batchnorm_train_gamma",
      [](std::mt19937_64& rng) { return random_tensor({3}, rng); },
      [](Tape& t, const Tensor& gamma) {
        std::mt19937_64 xrng(29);
        Tensor x = random_tensor({6, 3}, xrng);
        Tensor beta = Tensor::from({3}, {0.1, -0.2, 0.0});
        std::vector<double> rm(3, 0.0), rv(3, 1.0);
        Tensor y = t.batchnorm(x, gamma, beta, rm, rv, true);
        return t.sum(t.mul(y, y));
      });
  run("batchnorm_eval_input",
      [](std::mt19937_64& rng) { return random_tensor({4, 2, 3, 3}, rng); },
      [](Tape& t, const Tensor& x) {
        Tensor gamma = Tensor::from({2}, {1.1, 0.9});
        Tensor beta = Tensor::from({2}, {0.2, -0.1});
        std::vector<double> rm = {0.3, -0.2}, rv = {1.5, 0.7};
        Tensor y = t.batchnorm(x, gamma, beta, rm, rv, false);
        return t.sum(t.mul(y, y));
      });
  return cases;
}

std::vector<SuiteCase> loss_gradient_suite(int instances) {
  namespace obj = oebench::objectives;
  std::vector<SuiteCase> cases;
  auto run = [&](const std::string& name,
                 const std::function<Tensor(std::mt19937_64&)>& point,
                 const PointLoss& loss) {
    cases.push_back(check_gradients(name, instances, point, loss));
  };

  // feature batches kept away from the origin so the L1/L2 radials and the
  // anomaly log term stay smooth
  auto features = [](std::mt19937_64& rng) {
    Tensor z = random_tensor({4, 3}, rng);
    push_off_kinks(z, 0.2);
    return z;
  };
  const Tensor y_mixed = Tensor::from({4}, {1.0, 0.0, 1.0, 0.0});

  for (obj::RadialKind k :
       {obj::RadialKind::L1, obj::RadialKind::L2, obj::RadialKind::L2SQ,
        obj::RadialKind::PseudoHuber}) {
    run("hsc_" + obj::radial_name(k), features,
        [k, y_mixed](Tape& t, const Tensor& z) {
          obj::ObjectiveSpec spec;
          spec.radial = k;
          return obj::hsc_loss(t, spec, z, y_mixed);
        });
  }

  // classifier losses are checked through the sigmoid head so the clamp
  // never engages and the probability path itself is exercised
  auto logits = [](std::mt19937_64& rng) {
    return random_tensor({4, 3}, rng, -1.5, 1.5);
  };
  auto head_probs = [](Tape& t, const Tensor& x) {
    std::mt19937_64 wrng(41);
    Tensor w = random_tensor({1, 3}, wrng);
    return t.reshape(t.sigmoid(t.linear(x, w, nullptr)), Shape{4});
  };
  run("bce", logits, [&](Tape& t, const Tensor& x) {
    return obj::bce_loss(t, head_probs(t, x), y_mixed);
  });
  for (double gamma : {0.0, 1.0, 2.0}) {
    run("focal_gamma" + std::to_string(static_cast<int>(gamma)), logits,
        [&, gamma](Tape& t, const Tensor& x) {
          return obj::focal_loss(t, head_probs(t, x), y_mixed, gamma, 0.5);
        });
  }

  const Tensor center = Tensor::from({3}, {0.3, -0.4, 0.1});
  run("dsvdd", features, [&](Tape& t, const Tensor& z) {
    return obj::dsvdd_loss(t, z, center);
  });
  run("dsad", features, [&](Tape& t, const Tensor& z) {
    return obj::dsad_loss(t, z, y_mixed, center, 1.0, 1e-6);
  });
  return cases;
}

}  // namespace oebench::testsupport
