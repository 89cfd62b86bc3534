#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "aps/common.hpp"

namespace aps {

/// Thrown on malformed, truncated or version-mismatched binary files.
class SerializationError : public std::runtime_error {
 public:
  explicit SerializationError(const std::string& what) : std::runtime_error(what) {}
};

// Versioned named-tensor container format, little endian:
//   magic (8 bytes) | u32 version | u32 tensor count
//   per tensor: u32 name length, name bytes, u32 ndims, u64 dims..., f64 values (row major)
// Round trips are bit exact; readers refuse unknown magic or version.
namespace io {

constexpr char kTensorMagic[8] = {'A', 'P', 'S', 'T', 'N', 'S', 'R', '1'};
constexpr std::uint32_t kTensorVersion = 1;

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw SerializationError("truncated stream reading u32");
  return v;
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw SerializationError("truncated stream reading u64");
  return v;
}
inline double read_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw SerializationError("truncated stream reading f64");
  return v;
}
inline std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw SerializationError("truncated stream reading string");
  return s;
}

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  Vec values;
};

class TensorWriter {
 public:
  void add(std::string name, std::vector<std::uint64_t> dims, Vec values) {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    if (n != values.size())
      throw SerializationError("tensor '" + name + "': dims do not match value count");
    tensors_.push_back({std::move(name), std::move(dims), std::move(values)});
  }

  void write(std::ostream& os) const {
    os.write(kTensorMagic, sizeof kTensorMagic);
    write_u32(os, kTensorVersion);
    write_u32(os, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& t : tensors_) {
      write_string(os, t.name);
      write_u32(os, static_cast<std::uint32_t>(t.dims.size()));
      for (auto d : t.dims) write_u64(os, d);
      os.write(reinterpret_cast<const char*>(t.values.data()),
               static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    }
  }

 private:
  std::vector<NamedTensor> tensors_;
};

class TensorReader {
 public:
  explicit TensorReader(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kTensorMagic, sizeof magic) != 0)
      throw SerializationError("bad tensor container magic");
    const auto version = read_u32(is);
    if (version != kTensorVersion)
      throw SerializationError("unsupported tensor container version " + std::to_string(version));
    const auto count = read_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
      NamedTensor t;
      t.name = read_string(is);
      const auto ndims = read_u32(is);
      std::uint64_t n = 1;
      for (std::uint32_t d = 0; d < ndims; ++d) {
        t.dims.push_back(read_u64(is));
        n *= t.dims.back();
      }
      t.values.resize(n);
      is.read(reinterpret_cast<char*>(t.values.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
      if (!is) throw SerializationError("truncated tensor '" + t.name + "'");
      tensors_.push_back(std::move(t));
    }
  }

  const NamedTensor& get(const std::string& name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return t;
    throw SerializationError("tensor '" + name + "' not found");
  }

  const std::vector<NamedTensor>& all() const { return tensors_; }

 private:
  std::vector<NamedTensor> tensors_;
};

}  // namespace io
}  // namespace aps
