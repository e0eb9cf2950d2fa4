#include "oebench/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace oebench::data {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("truncated file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<char*>(b), 4);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file: " + path);
  return is;
}

std::vector<unsigned char> read_bytes(std::istream& is, std::size_t n,
                                      const std::string& path) {
  std::vector<unsigned char> buf(n);
  if (!is.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(n)))
    throw std::runtime_error("truncated file: " + path);
  return buf;
}

// symmetric reflection: ..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...
std::size_t reflect_index(long long i, long long n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return static_cast<std::size_t>(i);
}

}  // namespace

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.name = ds.name;
  out.split = ds.split;
  out.channels = ds.channels;
  out.height = ds.height;
  out.width = ds.width;
  out.pixels.reserve(idx.size() * ds.image_elems());
  out.labels.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i >= ds.size()) throw std::out_of_range("subset: index out of range");
    auto img = ds.image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width)
    throw std::invalid_argument("concat: image shapes differ");
  Dataset out = a;
  out.pixels.insert(out.pixels.end(), b.pixels.begin(), b.pixels.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& name, const std::string& split,
                 bool transpose) {
  auto is = open_binary(images_path);
  if (read_u32_be(is, images_path) != kIdxImageMagic)
    throw std::runtime_error("bad IDX image magic in " + images_path);
  const std::uint32_t n = read_u32_be(is, images_path);
  const std::uint32_t h = read_u32_be(is, images_path);
  const std::uint32_t w = read_u32_be(is, images_path);
  auto raw = read_bytes(is, std::size_t(n) * h * w, images_path);

  auto ls = open_binary(labels_path);
  if (read_u32_be(ls, labels_path) != kIdxLabelMagic)
    throw std::runtime_error("bad IDX label magic in " + labels_path);
  const std::uint32_t ln = read_u32_be(ls, labels_path);
  if (ln != n)
    throw std::runtime_error("IDX image/label count mismatch: " + images_path);
  auto raw_labels = read_bytes(ls, ln, labels_path);

  Dataset ds;
  ds.name = name;
  ds.split = split;
  ds.channels = 1;
  ds.height = h;
  ds.width = w;
  ds.pixels.resize(std::size_t(n) * h * w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t src = transpose ? x * w + y : y * w + x;
        ds.pixels[(i * h + y) * w + x] =
            static_cast<double>(raw[i * h * w + src]) / 255.0;
      }
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  if (ds.channels != 1)
    throw std::invalid_argument("write_idx: only single-channel data");
  std::ofstream os(images_path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open file: " + images_path);
  write_u32_be(os, kIdxImageMagic);
  write_u32_be(os, static_cast<std::uint32_t>(ds.size()));
  write_u32_be(os, static_cast<std::uint32_t>(ds.height));
  write_u32_be(os, static_cast<std::uint32_t>(ds.width));
  for (double v : ds.pixels) {
    const unsigned char b =
        static_cast<unsigned char>(std::lround(v * 255.0));
    os.put(static_cast<char>(b));
  }
  std::ofstream ls(labels_path, std::ios::binary);
  if (!ls) throw std::runtime_error("cannot open file: " + labels_path);
  write_u32_be(ls, kIdxLabelMagic);
  write_u32_be(ls, static_cast<std::uint32_t>(ds.size()));
  for (int label : ds.labels) ls.put(static_cast<char>(label));
}

Dataset load_cifar_binary(const std::vector<std::string>& paths,
                          const std::string& name, const std::string& split) {
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  Dataset ds;
  ds.name = name;
  ds.split = split;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  for (const auto& path : paths) {
    auto is = open_binary(path);
    is.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(is.tellg());
    is.seekg(0);
    if (bytes == 0 || bytes % kRecord != 0)
      throw std::runtime_error("bad CIFAR batch size in " + path);
    auto raw = read_bytes(is, bytes, path);
    for (std::size_t r = 0; r < bytes / kRecord; ++r) {
      const unsigned char* rec = raw.data() + r * kRecord;
      ds.labels.push_back(rec[0]);
      for (std::size_t j = 0; j < 3 * 32 * 32; ++j)
        ds.pixels.push_back(static_cast<double>(rec[1 + j]) / 255.0);
    }
  }
  return ds;
}

void write_cifar_binary(const Dataset& ds, const std::string& path) {
  if (ds.channels != 3 || ds.height != 32 || ds.width != 32)
    throw std::invalid_argument("write_cifar_binary: needs (3,32,32) images");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open file: " + path);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os.put(static_cast<char>(ds.labels[i]));
    for (double v : ds.image(i))
      os.put(static_cast<char>(
          static_cast<unsigned char>(std::lround(v * 255.0))));
  }
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open file: " + path);
  os.write("OEDS", 4);
  write_u32_be(os, 1);  // version
  auto write_str = [&](const std::string& s) {
    write_u32_be(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  write_str(ds.name);
  write_str(ds.split);
  write_u32_be(os, static_cast<std::uint32_t>(ds.channels));
  write_u32_be(os, static_cast<std::uint32_t>(ds.height));
  write_u32_be(os, static_cast<std::uint32_t>(ds.width));
  write_u32_be(os, static_cast<std::uint32_t>(ds.size()));
  for (int label : ds.labels) write_u32_be(os, static_cast<std::uint32_t>(label));
  os.write(reinterpret_cast<const char*>(ds.pixels.data()),
           static_cast<std::streamsize>(ds.pixels.size() * sizeof(double)));
}

Dataset load_dataset(const std::string& path) {
  auto is = open_binary(path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "OEDS", 4) != 0)
    throw std::runtime_error("bad dataset magic in " + path);
  if (read_u32_be(is, path) != 1)
    throw std::runtime_error("unsupported dataset version in " + path);
  auto read_str = [&] {
    const std::uint32_t n = read_u32_be(is, path);
    auto b = read_bytes(is, n, path);
    return std::string(b.begin(), b.end());
  };
  Dataset ds;
  ds.name = read_str();
  ds.split = read_str();
  ds.channels = read_u32_be(is, path);
  ds.height = read_u32_be(is, path);
  ds.width = read_u32_be(is, path);
  const std::uint32_t n = read_u32_be(is, path);
  ds.labels.resize(n);
  for (auto& label : ds.labels)
    label = static_cast<int>(read_u32_be(is, path));
  ds.pixels.resize(std::size_t(n) * ds.image_elems());
  if (!is.read(reinterpret_cast<char*>(ds.pixels.data()),
               static_cast<std::streamsize>(ds.pixels.size() * sizeof(double))))
    throw std::runtime_error("truncated file: " + path);
  return ds;
}

BenchmarkTask make_one_vs_rest(const Dataset& train, const Dataset& test,
                               const Dataset& oe_pool, int nominal_class,
                               const OeSpec& spec) {
  // class ids only collide when the dataset names match
  if (oe_pool.name == test.name) {
    std::set<int> anomaly_classes(test.labels.begin(), test.labels.end());
    anomaly_classes.erase(nominal_class);
    for (int c : oe_pool.labels)
      if (anomaly_classes.count(c))
        throw std::runtime_error(
            "make_one_vs_rest: OE pool '" + oe_pool.name + "' contains test "
            "anomaly class " + std::to_string(c) +
            "; OE must be disjoint from the ground-truth anomaly classes");
  }

  BenchmarkTask task;
  task.nominal_class = nominal_class;

  std::vector<std::size_t> nominal_idx;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train.labels[i] == nominal_class) nominal_idx.push_back(i);
  if (nominal_idx.empty())
    throw std::runtime_error("make_one_vs_rest: no training images of class " +
                             std::to_string(nominal_class));
  task.nominal_train = subset(train, nominal_idx);

  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> pool_idx(oe_pool.size());
  std::iota(pool_idx.begin(), pool_idx.end(), std::size_t{0});
  if (spec.diversity_k > 0) {
    std::set<int> class_set(oe_pool.labels.begin(), oe_pool.labels.end());
    std::vector<int> classes(class_set.begin(), class_set.end());
    if (spec.diversity_k > classes.size())
      throw std::invalid_argument(
          "make_one_vs_rest: diversity_k exceeds the OE class count");
    std::shuffle(classes.begin(), classes.end(), rng);
    std::set<int> kept(classes.begin(),
                       classes.begin() + static_cast<long>(spec.diversity_k));
    std::erase_if(pool_idx,
                  [&](std::size_t i) { return !kept.count(oe_pool.labels[i]); });
  }
  // shuffle once, take a prefix: subsets are nested across sizes per seed
  std::shuffle(pool_idx.begin(), pool_idx.end(), rng);
  const std::size_t take = std::min(spec.size, pool_idx.size());
  pool_idx.resize(take);
  task.oe_train = spec.blur_sigma > 0.0
                      ? gaussian_blur(subset(oe_pool, pool_idx), spec.blur_sigma)
                      : subset(oe_pool, pool_idx);

  task.test = test;
  task.test_binary.reserve(test.size());
  for (int c : test.labels)
    task.test_binary.push_back(c == nominal_class ? 1.0 : 0.0);
  return task;
}

std::vector<std::size_t> OeSampler::draw(std::size_t batch_size,
                                         std::mt19937_64& rng) {
  if (pool_ == 0 || batch_size == 0) return {};
  std::vector<std::size_t> batch;
  batch.reserve(batch_size);
  if (pool_ >= batch_size) {
    if (order_.empty() || cursor_ + batch_size > pool_) {
      order_.resize(pool_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::shuffle(order_.begin(), order_.end(), rng);
      cursor_ = 0;
    }
    batch.assign(order_.begin() + static_cast<long>(cursor_),
                 order_.begin() + static_cast<long>(cursor_ + batch_size));
    cursor_ += batch_size;
  } else {
    std::uniform_int_distribution<std::size_t> dist(0, pool_ - 1);
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(dist(rng));
  }
  return batch;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0.0)
    throw std::invalid_argument("gaussian_kernel: sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const long long radius = static_cast<long long>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (long long i = -radius; i <= radius; ++i) {
    const double w = std::exp(-static_cast<double>(i * i) /
                              (2.0 * sigma * sigma));
    k[i + radius] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

void gaussian_blur_image(std::span<double> image, std::size_t channels,
                         std::size_t height, std::size_t width, double sigma) {
  if (sigma < 0.0)
    throw std::invalid_argument("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return;
  const auto kernel = gaussian_kernel(sigma);
  const long long radius = (static_cast<long long>(kernel.size()) - 1) / 2;
  const long long h = static_cast<long long>(height);
  const long long w = static_cast<long long>(width);
  std::vector<double> tmp(height * width);
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = image.data() + c * height * width;
    // horizontal pass into tmp
    for (long long y = 0; y < h; ++y)
      for (long long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long long i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] *
                 plane[y * w + static_cast<long long>(reflect_index(x + i, w))];
        tmp[y * w + x] = acc;
      }
    // vertical pass back into the plane
    for (long long y = 0; y < h; ++y)
      for (long long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long long i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] *
                 tmp[reflect_index(y + i, h) * static_cast<std::size_t>(w) + x];
        plane[y * w + x] = acc;
      }
  }
}

Dataset gaussian_blur(const Dataset& ds, double sigma) {
  Dataset out = ds;
  for (std::size_t i = 0; i < out.size(); ++i)
    gaussian_blur_image(out.image(i), out.channels, out.height, out.width,
                        sigma);
  return out;
}

void augment_image(std::span<double> image, std::size_t channels,
                   std::size_t height, std::size_t width,
                   const AugmentSpec& spec, std::mt19937_64& rng) {
  const std::size_t plane = height * width;
  if (spec.jitter) {
    // multiplicative contrast about mid-gray, then brightness, joint over
    // channels so grayscale and color behave alike
    std::uniform_real_distribution<double> dist(1.0 - spec.jitter_amount,
                                                1.0 + spec.jitter_amount);
    const double contrast = dist(rng);
    const double brightness = dist(rng);
    for (double& v : image) v = brightness * (0.5 + contrast * (v - 0.5));
  }
  if (spec.crop) {
    const std::size_t p = spec.crop_pad;
    std::uniform_int_distribution<std::size_t> dist(0, 2 * p);
    const std::size_t dy = dist(rng), dx = dist(rng);
    std::vector<double> src(image.begin(), image.end());
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          // source coordinate in the zero-padded image
          const long long sy = static_cast<long long>(y + dy) -
                               static_cast<long long>(p);
          const long long sx = static_cast<long long>(x + dx) -
                               static_cast<long long>(p);
          const bool inside = sy >= 0 && sy < static_cast<long long>(height) &&
                              sx >= 0 && sx < static_cast<long long>(width);
          image[c * plane + y * width + x] =
              inside ? src[c * plane + static_cast<std::size_t>(sy) * width +
                           static_cast<std::size_t>(sx)]
                     : 0.0;
        }
  }
  if (spec.flip) {
    std::bernoulli_distribution coin(0.5);
    if (coin(rng))
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < height; ++y)
          for (std::size_t x = 0; x < width / 2; ++x)
            std::swap(image[c * plane + y * width + x],
                      image[c * plane + y * width + (width - 1 - x)]);
  }
  if (spec.noise) {
    std::normal_distribution<double> dist(0.0, spec.noise_std);
    for (double& v : image) v += dist(rng);
  }
  for (double& v : image) v = std::clamp(v, 0.0, 1.0);
}

namespace {

// multiscale generator constants; frozen for the acceptance experiments
constexpr std::size_t kMsSize = 32;
constexpr double kMsBase = 0.5;
constexpr double kMsBlobAmp = 0.35;
constexpr double kMsBlobEdge = 1.0;     // sigmoid falloff softness, pixels
constexpr double kMsTextureAmp = 0.10;
constexpr double kMsWavelength = 3.0;   // pixels
constexpr double kMsNoiseStd = 0.25;    // keeps the benchmark off AUC 1.0

void add_blob(std::span<double> img, double cx, double cy, double r) {
  for (std::size_t y = 0; y < kMsSize; ++y)
    for (std::size_t x = 0; x < kMsSize; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double d = std::sqrt(dx * dx + dy * dy);
      img[y * kMsSize + x] +=
          kMsBlobAmp / (1.0 + std::exp((d - r) / kMsBlobEdge));
    }
}

// stripes along x; the phase is the fine-scale degree of freedom
void add_texture(std::span<double> img, double phase) {
  constexpr double kTau = 6.283185307179586476925286766559;
  for (std::size_t y = 0; y < kMsSize; ++y)
    for (std::size_t x = 0; x < kMsSize; ++x)
      img[y * kMsSize + x] += kMsTextureAmp *
          std::sin(kTau * static_cast<double>(x) / kMsWavelength + phase);
}

}  // namespace

Dataset generate_multiscale(std::size_t n, MultiscaleKind kind,
                            std::uint64_t seed, const std::string& name,
                            const std::string& split) {
  Dataset ds;
  ds.name = name;
  ds.split = split;
  ds.channels = 1;
  ds.height = kMsSize;
  ds.width = kMsSize;
  ds.pixels.assign(n * kMsSize * kMsSize, kMsBase);
  ds.labels.assign(n, static_cast<int>(kind));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> center_jitter(-2.0, 2.0);
  std::uniform_real_distribution<double> big_radius(6.0, 8.0);
  std::uniform_real_distribution<double> small_radius(3.0, 4.5);
  std::uniform_real_distribution<double> small_center(8.0, 24.0);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  // fine anomalies shift the texture phase, bounded away from the nominal 0
  // so the shift is never degenerate; detecting a given shift needs OE whose
  // random phases land nearby, which is what makes OE size matter
  std::uniform_real_distribution<double> fine_phase(0.5 * 3.141592653589793,
                                                    1.5 * 3.141592653589793);
  std::normal_distribution<double> noise(0.0, kMsNoiseStd);

  const double mid = static_cast<double>(kMsSize) / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto img = ds.image(i);
    if (kind == MultiscaleKind::CoarseAnomaly) {
      for (int b = 0; b < 2; ++b)
        add_blob(img, small_center(rng), small_center(rng), small_radius(rng));
      add_texture(img, phase(rng));
    } else {
      // Nominal and FineAnomaly share the same draw order, so equal seeds
      // give pixel-aligned pairs differing only in the texture phase
      const double cx = mid + center_jitter(rng);
      const double cy = mid + center_jitter(rng);
      add_blob(img, cx, cy, big_radius(rng));
      const double shift = fine_phase(rng);
      add_texture(img, kind == MultiscaleKind::FineAnomaly ? shift : 0.0);
    }
    // the paired kinds draw noise after identical geometry sequences, so
    // equal seeds still give noise-identical nominal/fine pairs
    for (double& v : img) v += noise(rng);
    for (double& v : img) v = std::clamp(v, 0.0, 1.0);
  }
  return ds;
}

}  // namespace oebench::data
