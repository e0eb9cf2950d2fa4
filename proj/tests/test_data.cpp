#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "oebench/data.hpp"

using namespace oebench::data;

namespace {

// classes 0..(k-1) repeating, pixels quantized to the byte grid
Dataset toy_dataset(const std::string& name, const std::string& split,
                    std::size_t n, int classes, std::uint64_t seed,
                    std::size_t channels = 1, std::size_t hw = 8) {
  Dataset ds;
  ds.name = name;
  ds.split = split;
  ds.channels = channels;
  ds.height = hw;
  ds.width = hw;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  ds.pixels.resize(n * ds.image_elems());
  for (auto& v : ds.pixels) v = byte(rng) / 255.0;
  for (std::size_t i = 0; i < n; ++i)
    ds.labels.push_back(static_cast<int>(i) % classes);
  return ds;
}

}  // namespace

TEST_CASE("idx round trip is bit exact") {
  Dataset ds = toy_dataset("toy", "train", 2, 2, 1);
  write_idx(ds, "t_images.idx", "t_labels.idx");
  Dataset back = load_idx("t_images.idx", "t_labels.idx", "toy", "train");
  CHECK(back.pixels == ds.pixels);
  CHECK(back.labels == ds.labels);
  CHECK(back.height == 8);
  std::remove("t_images.idx");
  std::remove("t_labels.idx");
}

TEST_CASE("idx rejects a label file passed as images") {
  Dataset ds = toy_dataset("toy", "train", 2, 2, 2);
  write_idx(ds, "t2_images.idx", "t2_labels.idx");
  CHECK_THROWS_WITH_AS(
      load_idx("t2_labels.idx", "t2_images.idx", "toy", "train"),
      doctest::Contains("magic"), std::runtime_error);
  std::remove("t2_images.idx");
  std::remove("t2_labels.idx");
}

TEST_CASE("idx transpose swaps the per-image axes") {
  Dataset ds = toy_dataset("toy", "train", 1, 1, 3);
  write_idx(ds, "t3_images.idx", "t3_labels.idx");
  Dataset t = load_idx("t3_images.idx", "t3_labels.idx", "toy", "train", true);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      CHECK(t.pixels[y * 8 + x] == ds.pixels[x * 8 + y]);
  std::remove("t3_images.idx");
  std::remove("t3_labels.idx");
}

TEST_CASE("cifar binary round trip") {
  Dataset ds = toy_dataset("cifar", "train", 2, 10, 4, 3, 32);
  ds.labels = {6, 3};
  write_cifar_binary(ds, "t_batch.bin");
  Dataset back = load_cifar_binary({"t_batch.bin"}, "cifar", "train");
  CHECK(back.size() == 2);
  CHECK(back.labels[0] == 6);
  CHECK(back.pixels == ds.pixels);
  CHECK(back.channels == 3);
  std::remove("t_batch.bin");
}

TEST_CASE("dataset container round trip keeps doubles exactly") {
  Dataset ds = generate_multiscale(3, MultiscaleKind::Nominal, 5);
  save_dataset(ds, "t_ds.oeds");
  Dataset back = load_dataset("t_ds.oeds");
  CHECK(back.pixels == ds.pixels);
  CHECK(back.labels == ds.labels);
  CHECK(back.name == ds.name);
  std::remove("t_ds.oeds");
}

TEST_CASE("one-vs-rest slices and relabels") {
  Dataset train = toy_dataset("d", "train", 40, 4, 6);
  Dataset test = toy_dataset("d", "test", 20, 4, 7);
  Dataset oe = toy_dataset("aux", "train", 30, 3, 8);
  OeSpec spec;
  spec.size = 5;
  spec.seed = 1;
  BenchmarkTask task = make_one_vs_rest(train, test, oe, 2, spec);
  CHECK(task.nominal_train.size() == 10);
  for (int c : task.nominal_train.labels) CHECK(c == 2);
  CHECK(task.oe_train.size() == 5);
  CHECK(task.test.size() == 20);
  double nominal_count =
      std::accumulate(task.test_binary.begin(), task.test_binary.end(), 0.0);
  CHECK(nominal_count == 5.0);
}

TEST_CASE("oe size one keeps exactly one distinct image") {
  Dataset train = toy_dataset("d", "train", 12, 3, 9);
  Dataset test = toy_dataset("d", "test", 12, 3, 10);
  Dataset oe = toy_dataset("aux", "train", 16, 2, 11);
  OeSpec spec;
  spec.size = 1;
  BenchmarkTask task = make_one_vs_rest(train, test, oe, 0, spec);
  CHECK(task.oe_train.size() == 1);
}

TEST_CASE("diversity one restricts the oe pool to a single class") {
  Dataset train = toy_dataset("d", "train", 12, 3, 12);
  Dataset test = toy_dataset("d", "test", 12, 3, 13);
  Dataset oe = toy_dataset("aux", "train", 60, 6, 14);
  OeSpec spec;
  spec.diversity_k = 1;
  spec.seed = 3;
  BenchmarkTask task = make_one_vs_rest(train, test, oe, 0, spec);
  CHECK(task.oe_train.size() == 10);
  std::set<int> classes(task.oe_train.labels.begin(),
                        task.oe_train.labels.end());
  CHECK(classes.size() == 1);
}

TEST_CASE("oe pool overlapping test anomaly classes fails hard") {
  Dataset train = toy_dataset("d", "train", 12, 3, 15);
  Dataset test = toy_dataset("d", "test", 12, 3, 16);
  // deliberate violation: same dataset, contains anomaly classes 1 and 2
  Dataset bad_oe = toy_dataset("d", "train", 12, 3, 17);
  CHECK_THROWS_WITH_AS(make_one_vs_rest(train, test, bad_oe, 0, OeSpec{}),
                       doctest::Contains("disjoint"), std::runtime_error);
  // same class ids under a different dataset name are unrelated
  Dataset ok_oe = toy_dataset("other", "train", 12, 3, 18);
  CHECK_NOTHROW(make_one_vs_rest(train, test, ok_oe, 0, OeSpec{}));
}

TEST_CASE("oe subsets are nested across the size sweep for a fixed seed") {
  Dataset train = toy_dataset("d", "train", 12, 3, 19);
  Dataset test = toy_dataset("d", "test", 12, 3, 20);
  Dataset oe = toy_dataset("aux", "train", 64, 4, 21);
  auto images_at = [&](std::size_t size) {
    OeSpec spec;
    spec.size = size;
    spec.seed = 7;
    auto task = make_one_vs_rest(train, test, oe, 0, spec);
    std::set<std::vector<double>> imgs;
    for (std::size_t i = 0; i < task.oe_train.size(); ++i) {
      auto img = task.oe_train.image(i);
      imgs.insert(std::vector<double>(img.begin(), img.end()));
    }
    return imgs;
  };
  auto prev = images_at(1);
  for (std::size_t size : {2, 4, 8, 16, 32, 64}) {
    auto cur = images_at(size);
    CHECK(cur.size() == size);
    CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    prev = cur;
  }
}

TEST_CASE("oe sampler with a tiny pool draws with replacement") {
  OeSampler sampler(4);
  std::mt19937_64 rng(22);
  auto batch = sampler.draw(128, rng);
  REQUIRE(batch.size() == 128);
  std::set<std::size_t> seen(batch.begin(), batch.end());
  for (std::size_t i : batch) CHECK(i < 4);
  CHECK(seen.size() <= 4);  // pigeonhole: duplicates present

  OeSampler one(1);
  auto ones = one.draw(128, rng);
  for (std::size_t i : ones) CHECK(i == 0);
}

TEST_CASE("oe sampler covers the pool without replacement per epoch") {
  OeSampler sampler(12);
  std::mt19937_64 rng(23);
  std::set<std::size_t> epoch;
  for (int b = 0; b < 3; ++b)
    for (std::size_t i : sampler.draw(4, rng)) {
      CHECK(!epoch.count(i));  // no repeats inside one epoch
      epoch.insert(i);
    }
  CHECK(epoch.size() == 12);
}

TEST_CASE("oe sampler is deterministic under a fixed seed") {
  OeSampler a(7), b(7);
  std::mt19937_64 ra(24), rb(24);
  for (int i = 0; i < 5; ++i) CHECK(a.draw(3, ra) == b.draw(3, rb));
}

TEST_CASE("empty oe pool draws empty batches") {
  OeSampler sampler(0);
  std::mt19937_64 rng(25);
  CHECK(sampler.draw(128, rng).empty());
}

TEST_CASE("blur kernel sums to one across the sigma grid") {
  for (double sigma : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    auto k = gaussian_kernel(sigma);
    CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(3 * sigma)) + 1);
    double total = std::accumulate(k.begin(), k.end(), 0.0);
    CHECK(std::fabs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("blur with sigma zero is the bitwise identity") {
  Dataset ds = toy_dataset("d", "train", 3, 1, 26);
  Dataset out = gaussian_blur(ds, 0.0);
  CHECK(out.pixels == ds.pixels);
}

TEST_CASE("constant images are unchanged by any blur") {
  Dataset ds = toy_dataset("d", "train", 1, 1, 27, 1, 16);
  std::fill(ds.pixels.begin(), ds.pixels.end(), 0.37);
  for (double sigma : {0.5, 2.0, 8.0}) {
    Dataset out = gaussian_blur(ds, sigma);
    for (double v : out.pixels) CHECK(v == doctest::Approx(0.37).epsilon(1e-9));
  }
}

TEST_CASE("unit impulse center matches the kernel weight product") {
  Dataset ds;
  ds.name = "d";
  ds.split = "train";
  ds.height = ds.width = 15;
  ds.pixels.assign(15 * 15, 0.0);
  ds.pixels[7 * 15 + 7] = 1.0;
  ds.labels = {0};
  Dataset out = gaussian_blur(ds, 1.0);
  auto k = gaussian_kernel(1.0);
  const double center = k[(k.size() - 1) / 2];
  CHECK(out.pixels[7 * 15 + 7] == doctest::Approx(center * center).epsilon(1e-12));
}

TEST_CASE("blur rejects negative sigma") {
  Dataset ds = toy_dataset("d", "train", 1, 1, 28);
  CHECK_THROWS_AS(gaussian_blur(ds, -0.5), std::invalid_argument);
}

TEST_CASE("augment with all flags off is the identity") {
  Dataset ds = toy_dataset("d", "train", 1, 1, 29);
  std::vector<double> before = ds.pixels;
  std::mt19937_64 rng(30);
  augment_image(ds.image(0), 1, 8, 8, AugmentSpec{}, rng);
  CHECK(ds.pixels == before);
}

TEST_CASE("flipping twice with the same decision is the identity") {
  AugmentSpec spec;
  spec.flip = true;
  Dataset ds = toy_dataset("d", "train", 1, 1, 31);
  std::vector<double> before = ds.pixels;
  // the same rng state makes the same coin flip both times
  std::mt19937_64 r1(32), r2(32);
  augment_image(ds.image(0), 1, 8, 8, spec, r1);
  augment_image(ds.image(0), 1, 8, 8, spec, r2);
  CHECK(ds.pixels == before);
}

TEST_CASE("noise std lands near the requested level") {
  AugmentSpec spec;
  spec.noise = true;
  spec.noise_std = 0.1;
  Dataset ds = toy_dataset("d", "train", 1, 1, 33, 1, 64);  // 4096 pixels
  // mid-gray start so the clamp never engages
  std::fill(ds.pixels.begin(), ds.pixels.end(), 0.5);
  std::mt19937_64 rng(34);
  augment_image(ds.image(0), 1, 64, 64, spec, rng);
  double mean = 0, var = 0;
  for (double v : ds.pixels) mean += v - 0.5;
  mean /= static_cast<double>(ds.pixels.size());
  for (double v : ds.pixels) var += (v - 0.5 - mean) * (v - 0.5 - mean);
  var /= static_cast<double>(ds.pixels.size());
  CHECK(std::sqrt(var) == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("augment keeps pixels in range and shape intact") {
  AugmentSpec spec;
  spec.jitter = true;
  spec.crop = true;
  spec.crop_pad = 2;
  spec.flip = true;
  spec.noise = true;
  Dataset ds = toy_dataset("d", "train", 4, 1, 35);
  std::mt19937_64 rng(36);
  for (std::size_t i = 0; i < 4; ++i)
    augment_image(ds.image(i), 1, 8, 8, spec, rng);
  CHECK(ds.pixels.size() == 4 * 64);
  for (double v : ds.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("multiscale generation is deterministic and in range") {
  Dataset a = generate_multiscale(6, MultiscaleKind::CoarseAnomaly, 40);
  Dataset b = generate_multiscale(6, MultiscaleKind::CoarseAnomaly, 40);
  CHECK(a.pixels == b.pixels);
  for (double v : a.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(a.height == 32);
  for (int c : a.labels) CHECK(c == 1);
  CHECK(generate_multiscale(0, MultiscaleKind::Nominal, 1).size() == 0);
}

TEST_CASE("heavy blur collapses the fine-anomaly difference") {
  // same seed pairs nominal and fine-anomaly geometry exactly
  Dataset nominal = generate_multiscale(8, MultiscaleKind::Nominal, 41);
  Dataset fine = generate_multiscale(8, MultiscaleKind::FineAnomaly, 41);
  auto mad = [](const Dataset& x, const Dataset& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i)
      total += std::fabs(x.pixels[i] - y.pixels[i]);
    return total / static_cast<double>(x.pixels.size());
  };
  const double before = mad(nominal, fine);
  const double after = mad(gaussian_blur(nominal, 8.0),
                           gaussian_blur(fine, 8.0));
  CHECK(before >= 10.0 * after);
}
