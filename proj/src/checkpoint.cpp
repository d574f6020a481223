#include "mixcam/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mixcam {
namespace {

constexpr char kMagic[4] = {'M', 'X', 'C', 'M'};

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    fail(ErrorCategory::io, std::string("checkpoint: truncated while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void NamedTensors::put(std::string name, Tensor t) {
  for (auto& [n, existing] : items) {
    if (n == name) {
      existing = std::move(t);
      return;
    }
  }
  items.emplace_back(std::move(name), std::move(t));
}

const Tensor* NamedTensors::find(const std::string& name) const {
  for (const auto& [n, t] : items) {
    if (n == name) return &t;
  }
  return nullptr;
}

Tensor NamedTensors::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) fail(ErrorCategory::io, "checkpoint: missing tensor '" + name + "'");
  return *t;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCategory::io, "checkpoint: cannot open '" + path.string() + "' for writing");
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kCheckpointVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.items.size()));
  for (const auto& [name, t] : tensors.items) {
    if (!t.defined()) fail(ErrorCategory::state, "checkpoint: undefined tensor '" + name + "'");
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) write_le<std::uint64_t>(os, e);
    for (double v : t.value()) write_le<double>(os, v);
  }
  if (!os) fail(ErrorCategory::io, "checkpoint: write failed for '" + path.string() + "'");
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCategory::io, "checkpoint: cannot open '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCategory::io, "checkpoint: bad magic in '" + path.string() + "' (expected MXCM)");
  }
  const auto version = read_le<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    fail(ErrorCategory::io,
         "checkpoint: unsupported version " + std::to_string(version) + " in '" + path.string() +
             "'");
  }
  const auto count = read_le<std::uint32_t>(is, "tensor count");
  NamedTensors out;
  out.items.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_le<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      fail(ErrorCategory::io, "checkpoint: truncated while reading a tensor name");
    }
    const auto rank = read_le<std::uint32_t>(is, "rank");
    Shape shape(rank);
    for (auto& e : shape) e = read_le<std::uint64_t>(is, "extent");
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = read_le<double>(is, "payload");
    out.items.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace mixcam
