#pragma once

// Datasets: the CIFAR-10 binary loader, class-balanced subsetting,
// held-out partner pools and a synthetic generator for fast tests.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "samplepair/image.hpp"
#include "samplepair/random.hpp"

namespace samplepair {

struct DataFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ClassIndex = std::vector<std::vector<std::size_t>>;

/// Labeled images. `source_ids` identify each sample within the corpus it was
/// drawn from, so subsets and pools can be checked for disjointness.
struct Dataset {
  std::string name;
  std::size_t n_classes = 0;
  std::vector<ImageF> images;
  std::vector<int> labels;
  std::vector<std::size_t> source_ids;
  ClassIndex class_index;
  std::string checksum;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  void rebuild_index() {
    class_index.assign(n_classes, {});
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes)
        throw DataFormatError("label " + std::to_string(labels[i]) +
                              " out of range in " + name);
      class_index[static_cast<std::size_t>(labels[i])].push_back(i);
    }
  }

  /// class_index must partition [0, size()) consistently with labels.
  bool index_consistent() const {
    if (class_index.size() != n_classes || labels.size() != images.size() ||
        source_ids.size() != images.size())
      return false;
    std::vector<int> seen(size(), 0);
    for (std::size_t k = 0; k < n_classes; ++k)
      for (auto i : class_index[k]) {
        if (i >= size() || seen[i]++ ||
            labels[i] != static_cast<int>(k))
          return false;
      }
    return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
  }
};

/// Unlabeled held-out images used as pairing partners.
struct NonTrainingPool {
  std::vector<ImageF> images;
  std::vector<std::size_t> source_ids;
  std::size_t size() const noexcept { return images.size(); }
};

// ---------------------------------------------------------------- checksums

inline std::string to_hex(std::span<const unsigned char> bytes) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (auto b : bytes) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 15]);
  }
  return out;
}

inline std::string sha256_hex(std::span<const unsigned char> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  return to_hex(std::span(md).first(len));
}

/// Content hash of a dataset (labels, shapes and pixel values).
inline std::string dataset_checksum(const Dataset& ds) {
  std::vector<unsigned char> buf;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& img = ds.images[i];
    for (auto v : {static_cast<std::uint32_t>(ds.labels[i]),
                   static_cast<std::uint32_t>(img.height()),
                   static_cast<std::uint32_t>(img.width()),
                   static_cast<std::uint32_t>(img.channels())})
      for (int b = 0; b < 4; ++b) buf.push_back((v >> (8 * b)) & 0xff);
    auto raw = std::as_bytes(img.data());
    for (auto b : raw) buf.push_back(static_cast<unsigned char>(b));
  }
  return sha256_hex(buf);
}

// ----------------------------------------------------------------- CIFAR-10

namespace cifar10 {

inline constexpr std::size_t kSide = 32;
inline constexpr std::size_t kPlane = kSide * kSide;
inline constexpr std::size_t kRecordBytes = 1 + 3 * kPlane;
inline constexpr int kClasses = 10;

inline constexpr std::array<const char*, 10> kClassNames = {
    "airplane", "automobile", "bird", "cat", "deer",
    "dog",      "frog",       "horse", "ship", "truck"};

inline constexpr std::array<const char*, 5> kTrainFiles = {
    "data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
    "data_batch_4.bin", "data_batch_5.bin"};
inline constexpr const char* kTestFile = "test_batch.bin";

inline int class_id(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (name == kClassNames[i]) return static_cast<int>(i);
  throw std::invalid_argument("unknown CIFAR-10 class '" + std::string(name) + "'");
}

/// Decodes one 3073-byte record: label byte, then the R, G and B planes
/// (each 32x32 row-major). Intensities become v/255.
inline std::pair<ImageF, int> decode_record(std::span<const unsigned char> rec,
                                            std::string_view where = "record") {
  if (rec.size() != kRecordBytes)
    throw DataFormatError(std::string(where) + ": record has " +
                          std::to_string(rec.size()) + " bytes, expected 3073");
  const int label = rec[0];
  if (label >= kClasses)
    throw DataFormatError(std::string(where) + ": label byte " +
                          std::to_string(label) + " > 9");
  ImageF img(kSide, kSide, 3);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t p = 0; p < kPlane; ++p)
      img[p * 3 + ch] = static_cast<float>(rec[1 + ch * kPlane + p]) / 255.0f;
  return {std::move(img), label};
}

/// Inverse of decode_record for images holding exact k/255 intensities.
inline std::vector<unsigned char> encode_record(const ImageF& img, int label) {
  if (img.height() != kSide || img.width() != kSide || img.channels() != 3)
    throw ShapeError("CIFAR-10 records are 32x32x3, got " + img.dims_string());
  if (label < 0 || label >= kClasses)
    throw std::invalid_argument("CIFAR-10 label out of range");
  std::vector<unsigned char> rec(kRecordBytes);
  rec[0] = static_cast<unsigned char>(label);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t p = 0; p < kPlane; ++p)
      rec[1 + ch * kPlane + p] = static_cast<unsigned char>(
          std::lround(std::clamp(img[p * 3 + ch], 0.0f, 1.0f) * 255.0f));
  return rec;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Appends every record of one batch file to `ds`, hashing the raw bytes.
inline void append_batch(const std::filesystem::path& file, Dataset& ds,
                         EVP_MD_CTX* hash) {
  const auto bytes = read_file(file);
  if (bytes.size() % kRecordBytes != 0)
    throw DataFormatError(file.string() + ": truncated record " +
                          std::to_string(bytes.size() / kRecordBytes) + " (" +
                          std::to_string(bytes.size() % kRecordBytes) +
                          " trailing bytes)");
  EVP_DigestUpdate(hash, bytes.data(), bytes.size());
  const std::size_t n = bytes.size() / kRecordBytes;
  for (std::size_t r = 0; r < n; ++r) {
    auto rec = std::span(bytes).subspan(r * kRecordBytes, kRecordBytes);
    auto [img, label] = decode_record(
        rec, file.filename().string() + " record " + std::to_string(r));
    ds.source_ids.push_back(ds.images.size());
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
}

inline Dataset load_split(const std::filesystem::path& dir,
                          std::span<const char* const> files,
                          std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  ds.n_classes = kClasses;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  for (const char* f : files) {
    const auto path = dir / f;
    if (!std::filesystem::exists(path))
      throw DataFormatError("missing CIFAR-10 file " + path.string());
    append_batch(path, ds, ctx.get());
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  ds.checksum = to_hex(std::span(md).first(len));
  ds.rebuild_index();
  return ds;
}

}  // namespace cifar10

/// Loads the standard binary distribution (data_batch_1..5.bin,
/// test_batch.bin). Checksums are SHA-256 over the raw batch bytes in order.
inline std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir) {
  auto train = cifar10::load_split(dir, cifar10::kTrainFiles, "cifar10-train");
  const std::array<const char*, 1> test_files{cifar10::kTestFile};
  auto test = cifar10::load_split(dir, test_files, "cifar10-test");
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------- shaping

/// Copies the given positions (in order) out of `ds`.
inline Dataset select_samples(const Dataset& ds,
                              std::span<const std::size_t> positions,
                              std::string name) {
  Dataset out;
  out.name = std::move(name);
  out.n_classes = ds.n_classes;
  out.images.reserve(positions.size());
  for (auto i : positions) {
    out.images.push_back(ds.images.at(i));
    out.labels.push_back(ds.labels.at(i));
    out.source_ids.push_back(ds.source_ids.at(i));
  }
  out.rebuild_index();
  out.checksum = dataset_checksum(out);
  return out;
}

/// n_per_class samples per class, drawn without replacement; positions keep
/// their original relative order.
inline Dataset subset_per_class(const Dataset& ds, std::size_t n_per_class,
                                std::uint64_t seed) {
  RandomSource rng{mix_seed(seed)};
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < ds.n_classes; ++k) {
    auto ids = ds.class_index[k];
    if (n_per_class > ids.size())
      throw std::invalid_argument(
          "subset_per_class: requested " + std::to_string(n_per_class) +
          " but class " + std::to_string(k) + " has " +
          std::to_string(ids.size()));
    std::shuffle(ids.begin(), ids.end(), rng);
    keep.insert(keep.end(), ids.begin(), ids.begin() + n_per_class);
  }
  std::sort(keep.begin(), keep.end());
  return select_samples(ds, keep,
                        ds.name + "@" + std::to_string(n_per_class) + "pc");
}

/// Uniform draw of pool_size images from the samples of `ds` whose source ids
/// do not appear in `training`.
inline NonTrainingPool build_nontraining_pool(const Dataset& ds,
                                              const Dataset& training,
                                              std::size_t pool_size,
                                              std::uint64_t seed) {
  if (pool_size == 0) throw std::invalid_argument("non-training pool must be non-empty");
  std::unordered_set<std::size_t> used(training.source_ids.begin(),
                                       training.source_ids.end());
  std::vector<std::size_t> held_out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!used.contains(ds.source_ids[i])) held_out.push_back(i);
  if (pool_size > held_out.size())
    throw std::invalid_argument("non-training pool of " +
                                std::to_string(pool_size) + " requested but only " +
                                std::to_string(held_out.size()) +
                                " held-out samples exist");
  RandomSource rng{mix_seed(seed ^ 0x706f6f6cULL)};
  std::shuffle(held_out.begin(), held_out.end(), rng);
  held_out.resize(pool_size);
  std::sort(held_out.begin(), held_out.end());
  NonTrainingPool pool;
  for (auto i : held_out) {
    pool.images.push_back(ds.images[i]);
    pool.source_ids.push_back(ds.source_ids[i]);
  }
  return pool;
}

// --------------------------------------------------------------- synthetic

struct SyntheticSpec {
  std::size_t n_classes = 10;
  std::size_t n_per_class = 50;
  std::size_t image_size = 16;
  std::size_t channels = 3;
  double difficulty = 0.5;
  std::uint64_t seed = 1;
  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

namespace detail {

struct Blob {
  double cy, cx, sigma;
  std::array<double, 3> color;
};

inline std::vector<std::vector<Blob>> class_templates(const SyntheticSpec& s) {
  RandomSource rng{mix_seed(s.seed ^ 0x74656d706cULL)};
  const double side = static_cast<double>(s.image_size);
  std::vector<std::vector<Blob>> out(s.n_classes);
  for (auto& blobs : out)
    for (int b = 0; b < 3; ++b) {
      Blob bl{};
      bl.cy = side * (0.2 + 0.6 * uniform01(rng));
      bl.cx = side * (0.2 + 0.6 * uniform01(rng));
      bl.sigma = side * (0.08 + 0.1 * uniform01(rng));
      for (auto& c : bl.color) c = uniform01(rng) * 2.0 - 1.0;
      blobs.push_back(bl);
    }
  return out;
}

inline ImageF render(const SyntheticSpec& s, const std::vector<Blob>& blobs,
                     RandomSource& rng) {
  const std::size_t n = s.image_size;
  ImageF img(n, n, s.channels);
  const double max_shift = 2.0 * s.difficulty;
  const double dy = (uniform01(rng) * 2 - 1) * max_shift;
  const double dx = (uniform01(rng) * 2 - 1) * max_shift;
  std::normal_distribution<double> noise(0.0, 0.12 * s.difficulty);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t ch = 0; ch < s.channels; ++ch) {
        double v = 0.5;
        for (const auto& b : blobs) {
          const double ry = (static_cast<double>(y) - b.cy - dy) / b.sigma;
          const double rx = (static_cast<double>(x) - b.cx - dx) / b.sigma;
          v += 0.45 * b.color[ch % 3] * std::exp(-0.5 * (ry * ry + rx * rx));
        }
        if (s.difficulty > 0) v += noise(rng);
        img.at(y, x, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  return img;
}

inline Dataset render_split(const SyntheticSpec& s,
                            const std::vector<std::vector<Blob>>& templates,
                            std::uint64_t stream, std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  ds.n_classes = s.n_classes;
  RandomSource rng{mix_seed(s.seed ^ stream)};
  for (std::size_t i = 0; i < s.n_per_class; ++i)
    for (std::size_t k = 0; k < s.n_classes; ++k) {
      ds.source_ids.push_back(ds.images.size());
      ds.images.push_back(render(s, templates[k], rng));
      ds.labels.push_back(static_cast<int>(k));
    }
  ds.rebuild_index();
  ds.checksum = dataset_checksum(ds);
  return ds;
}

}  // namespace detail

/// Class-conditional images: each class is a fixed arrangement of three
/// coloured Gaussian blobs. `difficulty` scales a random translation (up to
/// 2*difficulty pixels) and additive pixel noise; at 0 every image of a class
/// is identical. Classes are exactly balanced in both splits.
inline std::pair<Dataset, Dataset> make_synthetic(const SyntheticSpec& s) {
  if (s.n_classes == 0 || s.n_per_class == 0 || s.image_size == 0 ||
      s.channels == 0 || s.difficulty < 0)
    throw std::invalid_argument("synthetic dataset parameters must be positive");
  const auto templates = detail::class_templates(s);
  return {detail::render_split(s, templates, 0x747261696eULL, "synthetic-train"),
          detail::render_split(s, templates, 0x74657374ULL, "synthetic-test")};
}

inline std::pair<Dataset, Dataset> make_synthetic(std::size_t n_classes,
                                                  std::size_t n_per_class,
                                                  std::size_t image_size,
                                                  double difficulty,
                                                  std::uint64_t seed) {
  return make_synthetic(SyntheticSpec{n_classes, n_per_class, image_size, 3,
                                      difficulty, seed});
}

}  // namespace samplepair
