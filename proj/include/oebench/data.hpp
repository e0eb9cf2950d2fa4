#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace oebench::data {

/// Images are (N, C, H, W) doubles in [0,1], flattened row-major.
/// Class ids are namespaced by dataset name: class 3 of "mnist" and class 3
/// of "emnist-letters" are unrelated, which is what the OE disjointness
/// check relies on.
struct Dataset {
  std::string name;
  std::string split;  // "train" or "test"
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_elems() const { return channels * height * width; }
  std::span<const double> image(std::size_t i) const {
    return {pixels.data() + i * image_elems(), image_elems()};
  }
  std::span<double> image(std::size_t i) {
    return {pixels.data() + i * image_elems(), image_elems()};
  }
};

/// Rows of `ds` selected by `idx`, in order (duplicates allowed).
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx);

/// Row-wise concatenation; shapes and names must match.
Dataset concat(const Dataset& a, const Dataset& b);

/// How to build the OE training set for one task.
struct OeSpec {
  static constexpr std::size_t kAll = std::numeric_limits<std::size_t>::max();
  std::size_t size = kAll;   // distinct images; clamped to the pool size
  std::size_t diversity_k = 0;  // restrict to k random OE classes; 0 = all
  double blur_sigma = 0.0;      // applied to OE images at preparation time
  std::uint64_t seed = 0;
};

/// One one-vs-rest benchmark: train on the nominal class plus OE samples,
/// test on the full test split relabeled nominal (1) vs rest (0).
struct BenchmarkTask {
  int nominal_class = 0;
  Dataset nominal_train;
  Dataset oe_train;
  Dataset test;
  std::vector<double> test_binary;  // 1 = nominal, aligned with test rows
};

// -- ingestion ---------------------------------------------------------------

/// Big-endian IDX pair (image magic 0x803, label magic 0x801), pixels / 255.
/// `transpose` swaps H/W axes per image (EMNIST files are stored transposed).
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& name, const std::string& split,
                 bool transpose = false);

/// Writes a single-channel dataset back to an IDX pair (pixels * 255, rounded).
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path);

/// CIFAR-10 binary batches: per record 1 label byte + 3072 channel-major
/// pixel bytes. Multiple batch files concatenate in order.
Dataset load_cifar_binary(const std::vector<std::string>& paths,
                          const std::string& name, const std::string& split);

void write_cifar_binary(const Dataset& ds, const std::string& path);

/// Lossless f64 container for synthetic datasets (same framing style as
/// network checkpoints).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// -- task construction -------------------------------------------------------

/// Throws if the OE pool shares a (name, class) pair with the test anomaly
/// classes. OE subsampling is a seeded shuffle prefix, so subsets are nested
/// across sizes for a fixed seed. Blur is applied to the OE slice here,
/// before any augmentation.
BenchmarkTask make_one_vs_rest(const Dataset& train, const Dataset& test,
                               const Dataset& oe_pool, int nominal_class,
                               const OeSpec& spec);

/// Draws OE row indices: a fresh shuffle each epoch when the pool covers a
/// batch, uniform with replacement when it does not. Empty pool draws empty
/// batches (pure one-class mode).
class OeSampler {
 public:
  explicit OeSampler(std::size_t pool_size) : pool_(pool_size) {}
  std::vector<std::size_t> draw(std::size_t batch_size, std::mt19937_64& rng);

 private:
  std::size_t pool_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// -- pixel pipeline ----------------------------------------------------------

/// Discrete Gaussian, radius ceil(3 sigma), normalized to sum 1.
std::vector<double> gaussian_kernel(double sigma);

/// Separable convolution with reflect padding; sigma = 0 is bitwise identity.
void gaussian_blur_image(std::span<double> image, std::size_t channels,
                         std::size_t height, std::size_t width, double sigma);
Dataset gaussian_blur(const Dataset& ds, double sigma);

struct AugmentSpec {
  bool jitter = false;
  double jitter_amount = 0.2;  // multiplicative brightness/contrast range
  bool crop = false;
  std::size_t crop_pad = 4;  // 2 for 28x28 grayscale
  bool flip = false;         // horizontal, prob 0.5; off for digits/letters
  bool noise = false;
  double noise_std = 0.05;
};

/// In-place, order: jitter, crop, flip, noise, clamp to [0,1]. Shape
/// preserved; deterministic given the rng state.
void augment_image(std::span<double> image, std::size_t channels,
                   std::size_t height, std::size_t width,
                   const AugmentSpec& spec, std::mt19937_64& rng);

// -- synthetic multiscale testbed --------------------------------------------

/// Every image is one coarse structure (a smooth blob) plus one fine
/// structure (a high-frequency stripe texture):
///   Nominal        large centered blob + the fixed reference texture
///   CoarseAnomaly  two small off-center blobs + random-phase texture
///   FineAnomaly    nominal blob geometry + texture rotated 90 degrees
/// FineAnomaly consumes geometry draws exactly like Nominal, so equal seeds
/// give pixel-aligned pairs differing only in texture.
enum class MultiscaleKind { Nominal = 0, CoarseAnomaly = 1, FineAnomaly = 2 };

Dataset generate_multiscale(std::size_t n, MultiscaleKind kind,
                            std::uint64_t seed,
                            const std::string& name = "multiscale",
                            const std::string& split = "train");

}  // namespace oebench::data
