#pragma once

// Writes CIFAR-10-format batch files with random pixels so the loader can be
// exercised without the real corpus. Record r of the train split has label
// r % 10, so every file is class-balanced.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "samplepair/data.hpp"

namespace fixtures {

struct CifarFixture {
  std::filesystem::path dir;
  std::vector<std::vector<unsigned char>> train_files;  // raw bytes per batch file
  std::vector<unsigned char> test_file;
};

inline std::vector<unsigned char> random_records(std::size_t n, std::size_t first_label,
                                                 std::mt19937_64& rng) {
  std::vector<unsigned char> bytes(n * samplepair::cifar10::kRecordBytes);
  std::uniform_int_distribution<int> px(0, 255);
  for (std::size_t r = 0; r < n; ++r) {
    auto* rec = bytes.data() + r * samplepair::cifar10::kRecordBytes;
    rec[0] = static_cast<unsigned char>((first_label + r) % 10);
    for (std::size_t i = 1; i < samplepair::cifar10::kRecordBytes; ++i)
      rec[i] = static_cast<unsigned char>(px(rng));
  }
  return bytes;
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw std::runtime_error("fixture write failed: " + p.string());
}

/// train_per_class * 10 records are split evenly over the five train files,
/// so train_per_class should be a multiple of 5.
inline CifarFixture write_cifar_fixture(const std::filesystem::path& dir,
                                        std::size_t train_per_class,
                                        std::size_t test_per_class, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  CifarFixture fx;
  fx.dir = dir;
  std::mt19937_64 rng{seed};
  const std::size_t per_file = train_per_class * 10 / 5;
  for (std::size_t f = 0; f < 5; ++f) {
    fx.train_files.push_back(random_records(per_file, f * per_file, rng));
    write_bytes(dir / samplepair::cifar10::kTrainFiles[f], fx.train_files.back());
  }
  fx.test_file = random_records(test_per_class * 10, 0, rng);
  write_bytes(dir / samplepair::cifar10::kTestFile, fx.test_file);
  return fx;
}

inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() /
           ("samplepair-" + tag + "-" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixtures
