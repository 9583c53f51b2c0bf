#pragma once

// Binary checkpoint: network spec, every parameter tensor, batch-norm running
// statistics and the Adam state. Layout (all integers little-endian):
//
//   magic      8 bytes  "SPCKPT\0\0"
//   version    u32      = 1
//   scalar     u32      sizeof(T): 4 (float) or 8 (double)
//   spec       u64 length + UTF-8 JSON of the NetworkSpec
//   params     u64 count, then per tensor:
//                u32 name length + name, u32 rank, u64 dims[rank],
//                u64 element count, raw T values
//   buffers    u64 count, then per buffer: u32 name length + name,
//                u64 element count, raw T values
//   optimizer  f64 step_size, f64 beta1, f64 beta2, f64 eps, i64 step,
//              u64 tensor count, then for each tensor: u64 n + n T (first
//              moment) and u64 n + n T (second moment)
//
// Values are stored bit-for-bit, so save -> load -> save is byte-identical.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "samplepair/nn/adam.hpp"
#include "samplepair/nn/network.hpp"

namespace samplepair::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'C', 'K', 'P', 'T', 0, 0};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename V>
  void pod(V v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(V));
  }
  void str32(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename T>
  void values(std::span<const T> v) {
    pod(static_cast<std::uint64_t>(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size_bytes()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <typename V>
  V pod() {
    V v{};
    read(reinterpret_cast<char*>(&v), sizeof(V));
    return v;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::string str32() { return str(pod<std::uint32_t>()); }
  template <typename T>
  std::vector<T> values(std::size_t limit = std::size_t(1) << 32) {
    const auto n = pod<std::uint64_t>();
    if (n > limit) throw CheckpointError("checkpoint tensor too large");
    std::vector<T> v(n);
    read(reinterpret_cast<char*>(v.data()), n * sizeof(T));
    return v;
  }

 private:
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw CheckpointError("checkpoint truncated");
  }
  std::istream& in_;
};

}  // namespace detail

template <typename T>
void write_checkpoint(std::ostream& out, Network<T>& net, const OptimizerState<T>& opt) {
  detail::Writer w(out);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  w.pod(kCheckpointVersion);
  w.pod(static_cast<std::uint32_t>(sizeof(T)));
  const std::string spec = nlohmann::json(net.spec()).dump();
  w.pod(static_cast<std::uint64_t>(spec.size()));
  out.write(spec.data(), static_cast<std::streamsize>(spec.size()));

  const auto params = net.params();
  w.pod(static_cast<std::uint64_t>(params.size()));
  for (const auto& p : params) {
    w.str32(p.name);
    w.pod(static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) w.pod(static_cast<std::uint64_t>(d));
    w.values(std::span<const T>(p.value));
  }
  const auto bufs = net.buffers();
  w.pod(static_cast<std::uint64_t>(bufs.size()));
  for (const auto& b : bufs) {
    w.str32(b.name);
    w.values(std::span<const T>(b.value));
  }

  w.pod(opt.hyper.step_size);
  w.pod(opt.hyper.beta1);
  w.pod(opt.hyper.beta2);
  w.pod(opt.hyper.eps);
  w.pod(static_cast<std::int64_t>(opt.step));
  w.pod(static_cast<std::uint64_t>(opt.m.size()));
  for (std::size_t i = 0; i < opt.m.size(); ++i) {
    w.values(std::span<const T>(opt.m[i]));
    w.values(std::span<const T>(opt.v[i]));
  }
  if (!out) throw CheckpointError("checkpoint write failed");
}

template <typename T>
std::pair<Network<T>, OptimizerState<T>> read_checkpoint(std::istream& in) {
  detail::Reader r(in);
  const std::string magic = r.str(sizeof kCheckpointMagic);
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  if (const auto v = r.pod<std::uint32_t>(); v != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
  if (const auto s = r.pod<std::uint32_t>(); s != sizeof(T))
    throw CheckpointError("checkpoint scalar size " + std::to_string(s) +
                          " does not match requested type");
  const auto spec_len = r.pod<std::uint64_t>();
  if (spec_len > (1u << 24)) throw CheckpointError("checkpoint spec too large");
  NetworkSpec spec = nlohmann::json::parse(r.str(spec_len)).get<NetworkSpec>();

  Network<T> net(spec);
  auto params = net.params();
  if (r.pod<std::uint64_t>() != params.size())
    throw CheckpointError("checkpoint parameter count does not match its spec");
  for (auto& p : params) {
    if (r.str32() != p.name) throw CheckpointError("checkpoint parameter name mismatch at " + p.name);
    const auto rank = r.pod<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.pod<std::uint64_t>());
    if (shape != p.shape) throw CheckpointError("checkpoint shape mismatch for " + p.name);
    const auto v = r.values<T>();
    if (v.size() != p.value.size()) throw CheckpointError("checkpoint size mismatch for " + p.name);
    std::copy(v.begin(), v.end(), p.value.begin());
  }
  auto bufs = net.buffers();
  if (r.pod<std::uint64_t>() != bufs.size())
    throw CheckpointError("checkpoint buffer count does not match its spec");
  for (auto& b : bufs) {
    if (r.str32() != b.name) throw CheckpointError("checkpoint buffer name mismatch at " + b.name);
    const auto v = r.values<T>();
    if (v.size() != b.value.size()) throw CheckpointError("checkpoint size mismatch for " + b.name);
    std::copy(v.begin(), v.end(), b.value.begin());
  }

  OptimizerState<T> opt;
  opt.hyper.step_size = r.pod<double>();
  opt.hyper.beta1 = r.pod<double>();
  opt.hyper.beta2 = r.pod<double>();
  opt.hyper.eps = r.pod<double>();
  opt.step = r.pod<std::int64_t>();
  const auto n = r.pod<std::uint64_t>();
  if (n != 0 && n != params.size())
    throw CheckpointError("optimizer state does not match the parameter list");
  for (std::uint64_t i = 0; i < n; ++i) {
    opt.m.push_back(r.values<T>());
    opt.v.push_back(r.values<T>());
    if (opt.m.back().size() != params[i].value.size() ||
        opt.v.back().size() != params[i].value.size())
      throw CheckpointError("optimizer moment size mismatch for " + params[i].name);
  }
  return {std::move(net), std::move(opt)};
}

template <typename T>
std::string checkpoint_bytes(Network<T>& net, const OptimizerState<T>& opt) {
  std::ostringstream s(std::ios::binary);
  write_checkpoint(s, net, opt);
  return std::move(s).str();
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, Network<T>& net,
                     const OptimizerState<T>& opt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  write_checkpoint(out, net, opt);
}

template <typename T>
std::pair<Network<T>, OptimizerState<T>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint<T>(in);
}

}  // namespace samplepair::nn
