#include "ad/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace ad {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'P', 'T'};
constexpr uint8_t kVersion = 1;

void put_u16(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}
void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
void put_f64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
double get_f64(std::istream& is) {
  uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::string& name_prefix) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open for write: " + path);
  uint32_t count = 0;
  for (const auto& [name, t] : params.params)
    if (name.rfind(name_prefix, 0) == 0) ++count;
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  put_u32(os, count);
  for (const auto& [name, t] : params.params) {
    if (name.rfind(name_prefix, 0) != 0) continue;
    if (name.size() > 0xffff) throw CheckpointError("parameter name too long: " + name);
    put_u16(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) put_u64(os, static_cast<uint64_t>(t.shape()[i]));
    for (int64_t i = 0; i < t.size(); ++i) put_f64(os, t.data()[i]);
  }
  if (!os) throw CheckpointError("write failed: " + path);
}

void load_checkpoint(const std::string& path, ParamStore& params,
                     const std::string& name_prefix) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open for read: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("bad magic in checkpoint: " + path);
  int version = is.get();
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  uint32_t count = get_u32(is);
  for (uint32_t r = 0; r < count; ++r) {
    uint16_t name_len = get_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    int ndim = is.get();
    if (ndim < 0 || ndim > 8) throw CheckpointError("corrupt record (ndim) in " + path);
    Shape shape(static_cast<size_t>(ndim));
    for (int i = 0; i < ndim; ++i) shape[i] = static_cast<int64_t>(get_u64(is));
    int64_t n = numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) data[i] = get_f64(is);
    if (!is) throw CheckpointError("truncated checkpoint: " + path);
    if (!name_prefix.empty() && name.rfind(name_prefix, 0) != 0) continue;
    params.params[name] = Tensor::from(std::move(shape), std::move(data));
  }
}

}  // namespace ad
