#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "edit/core.hpp"
#include "edit/errors.hpp"
#include "edit/tensor.hpp"

namespace edit {

// Single binary container: magic + version, a length-prefixed JSON header,
// then named f64 tensors (little-endian payloads), and a trailing FNV-1a
// hash over everything after the magic for integrity checking.

constexpr int kCheckpointFormatVersion = 1;
constexpr char kCheckpointMagic[8] = {'E', 'D', 'I', 'T', 'C', 'K', 'P', 'T'};

namespace detail {

class Hasher {
 public:
  void update(const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 0x100000001b3ull;
    }
  }
  uint64_t digest() const { return h_; }

 private:
  uint64_t h_ = 0xcbf29ce484222325ull;
};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  void raw(const void* p, size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    hash_.update(p, n);
  }
  template <typename T>
  void pod(T v) {
    raw(&v, sizeof(T));
  }
  void finish() {
    uint64_t d = hash_.digest();
    os_.write(reinterpret_cast<const char*>(&d), sizeof(d));
  }

 private:
  std::ostream& os_;
  Hasher hash_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  void raw(void* p, size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(static_cast<size_t>(is_.gcount()) == n, ErrorKind::integrity,
            "checkpoint truncated");
    hash_.update(p, n);
  }
  template <typename T>
  T pod() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  void verify_hash() {
    uint64_t expect = hash_.digest();
    uint64_t stored = 0;
    is_.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    require(is_.gcount() == sizeof(stored), ErrorKind::integrity,
            "checkpoint truncated (missing integrity hash)");
    require(stored == expect, ErrorKind::integrity,
            "checkpoint payload hash mismatch");
  }

 private:
  std::istream& is_;
  Hasher hash_;
};

}  // namespace detail

struct CheckpointData {
  json header;  // config, generator spec, step, anything structured
  NamedTensors tensors;
};

inline void write_tensor_container(std::ostream& os, const CheckpointData& d) {
  detail::Writer w(os);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  uint32_t version = kCheckpointFormatVersion;
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));

  std::string header = d.header.dump();
  w.pod<uint64_t>(header.size());
  w.raw(header.data(), header.size());

  w.pod<uint32_t>(static_cast<uint32_t>(d.tensors.size()));
  for (const auto& [name, t] : d.tensors) {
    w.pod<uint16_t>(static_cast<uint16_t>(name.size()));
    w.raw(name.data(), name.size());
    w.pod<uint8_t>(0);  // dtype 0 = f64
    w.pod<uint8_t>(static_cast<uint8_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) w.pod<int64_t>(t.dim(i));
    w.raw(t.data.data(), t.data.size() * sizeof(double));
  }
  w.finish();
}

inline CheckpointData read_tensor_container(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  require(is.gcount() == sizeof(magic) &&
              std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0,
          ErrorKind::format, "not a checkpoint container (bad magic)");
  uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  require(is.gcount() == sizeof(version), ErrorKind::integrity,
          "checkpoint truncated (missing version)");
  require(version == kCheckpointFormatVersion, ErrorKind::format,
          "unsupported checkpoint format version " + std::to_string(version) +
              " (expected " + std::to_string(kCheckpointFormatVersion) + ")");

  detail::Reader r(is);
  CheckpointData d;
  uint64_t header_len = r.pod<uint64_t>();
  require(header_len < (1ull << 30), ErrorKind::integrity,
          "checkpoint header length is implausible");
  std::string header(header_len, '\0');
  r.raw(header.data(), header.size());
  try {
    d.header = json::parse(header);
  } catch (const json::exception& e) {
    fail(ErrorKind::integrity, std::string("checkpoint header unparsable: ") + e.what());
  }

  uint32_t count = r.pod<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = r.pod<uint16_t>();
    std::string name(name_len, '\0');
    r.raw(name.data(), name.size());
    uint8_t dtype = r.pod<uint8_t>();
    require(dtype == 0, ErrorKind::format, "unsupported tensor dtype tag");
    uint8_t ndim = r.pod<uint8_t>();
    std::vector<int> shape;
    int64_t numel = 1;
    for (uint8_t k = 0; k < ndim; ++k) {
      int64_t dim = r.pod<int64_t>();
      require(dim > 0 && dim < (1ll << 31), ErrorKind::integrity,
              "checkpoint tensor dimension is implausible");
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
    }
    require(numel < (1ll << 33), ErrorKind::integrity,
            "checkpoint tensor size is implausible");
    Tensor t(shape);
    r.raw(t.data.data(), t.data.size() * sizeof(double));
    d.tensors.emplace(std::move(name), std::move(t));
  }
  r.verify_hash();
  return d;
}

inline void write_tensor_container_file(const std::string& path,
                                        const CheckpointData& d) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::data,
          "cannot open for writing: " + path);
  write_tensor_container(os, d);
  os.flush();
  require(static_cast<bool>(os), ErrorKind::data, "write failed: " + path);
}

inline CheckpointData read_tensor_container_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::data, "cannot open: " + path);
  return read_tensor_container(is);
}

}  // namespace edit
