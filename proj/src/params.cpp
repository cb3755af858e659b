#include "soupforge/params.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "soupforge/kernels.hpp"

namespace soupforge {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'O', 'U', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxNameLen = 1u << 20;
constexpr std::uint32_t kMaxNdim = 64;

const std::array<std::uint32_t, 256>& crc_table() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
      t[i] = c;
    }
    return t;
  }();
  return table;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v),
      static_cast<unsigned char>(v >> 8),
      static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 24),
  };
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d, std::uint32_t& crc) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  crc = crc32(b, 8, crc);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4)
    throw IoError(IoError::Kind::Truncated, "checkpoint truncated while reading header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is, std::uint32_t& crc) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (is.gcount() != 8)
    throw IoError(IoError::Kind::Truncated, "checkpoint truncated inside payload");
  crc = crc32(b, 8, crc);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

struct HeaderScan {
  LayerMap map;
};

// Reads through the layer headers; if payload is null the data is skipped.
HeaderScan scan_layers(std::istream& is, const std::filesystem::path& path,
                       ParamVector* payload, std::uint32_t* crc) {
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4)
    throw IoError(IoError::Kind::Truncated,
                  path.string() + ": file too short for magic");
  if (std::memcmp(magic, kMagic.data(), 4) != 0)
    throw IoError(IoError::Kind::BadMagic, path.string() + ": bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw IoError(IoError::Kind::BadVersion,
                  path.string() + ": unsupported version " + std::to_string(version));
  const std::uint32_t layer_count = get_u32(is);
  if (layer_count == 0)
    throw IoError(IoError::Kind::Malformed, path.string() + ": zero layers");

  HeaderScan out;
  std::size_t offset = 0;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const std::uint32_t name_len = get_u32(is);
    if (name_len == 0 || name_len > kMaxNameLen)
      throw IoError(IoError::Kind::Malformed, path.string() + ": bad layer name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (is.gcount() != static_cast<std::streamsize>(name_len))
      throw IoError(IoError::Kind::Truncated, path.string() + ": truncated layer name");
    const std::uint32_t ndim = get_u32(is);
    if (ndim == 0 || ndim > kMaxNdim)
      throw IoError(IoError::Kind::Malformed, path.string() + ": bad layer rank");
    std::vector<std::uint32_t> dims(ndim);
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      dims[d] = get_u32(is);
      if (dims[d] == 0)
        throw IoError(IoError::Kind::Malformed, path.string() + ": zero dimension");
      if (count > std::numeric_limits<std::size_t>::max() / dims[d])
        throw IoError(IoError::Kind::Malformed, path.string() + ": dimension overflow");
      count *= dims[d];
    }
    if (payload) {
      for (std::size_t i = 0; i < count; ++i) payload->push_back(get_f64(is, *crc));
    } else {
      is.seekg(static_cast<std::streamoff>(count * 8), std::ios::cur);
      if (!is)
        throw IoError(IoError::Kind::Truncated, path.string() + ": truncated payload");
    }
    out.map.layers.push_back(LayerInfo{std::move(name), std::move(dims), offset});
    offset += count;
  }
  out.map.total_len = offset;
  return out;
}

}  // namespace

std::size_t LayerInfo::size() const {
  std::size_t n = 1;
  for (std::uint32_t d : shape) n *= d;
  return n;
}

LayerMap LayerMap::build(
    const std::vector<std::pair<std::string, std::vector<std::uint32_t>>>& shapes) {
  LayerMap m;
  std::size_t offset = 0;
  for (const auto& [name, shape] : shapes) {
    LayerInfo info{name, shape, offset};
    offset += info.size();
    m.layers.push_back(std::move(info));
  }
  m.total_len = offset;
  m.validate();
  return m;
}

int LayerMap::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  return -1;
}

void LayerMap::validate() const {
  if (layers.empty()) throw ShapeError("layer map has no layers");
  std::unordered_set<std::string_view> names;
  std::size_t offset = 0;
  for (const auto& l : layers) {
    if (l.name.empty()) throw ShapeError("layer with empty name");
    if (!names.insert(l.name).second) throw ShapeError("duplicate layer name: " + l.name);
    if (l.offset != offset) throw ShapeError("non-contiguous layer offsets");
    if (l.shape.empty()) throw ShapeError("layer with empty shape: " + l.name);
    for (std::uint32_t d : l.shape)
      if (d == 0) throw ShapeError("zero dimension in layer: " + l.name);
    offset += l.size();
  }
  if (offset != total_len) throw ShapeError("layer sizes do not sum to total length");
  if (total_len == 0) throw ShapeError("layer map covers zero parameters");
}

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t crc) {
  const auto& table = crc_table();
  const unsigned char* p = static_cast<const unsigned char*>(data);
  crc = ~crc;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
  return ~crc;
}

void write_checkpoint(const LayerMap& layers, const ParamVector& params,
                      const std::filesystem::path& path) {
  layers.validate();
  if (params.size() != layers.total_len)
    throw ShapeError("parameter vector length " + std::to_string(params.size()) +
                     " does not match layer map length " +
                     std::to_string(layers.total_len));

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::OpenFailed, "cannot open for write: " + path.string());

  os.write(kMagic.data(), 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(layers.layer_count()));
  std::uint32_t crc = 0;
  for (const auto& l : layers.layers) {
    put_u32(os, static_cast<std::uint32_t>(l.name.size()));
    os.write(l.name.data(), static_cast<std::streamsize>(l.name.size()));
    put_u32(os, static_cast<std::uint32_t>(l.shape.size()));
    for (std::uint32_t d : l.shape) put_u32(os, d);
    const double* p = params.data() + l.offset;
    for (std::size_t i = 0; i < l.size(); ++i) put_f64(os, p[i], crc);
  }
  put_u32(os, crc);
  os.flush();
  if (!os) throw IoError(IoError::Kind::WriteFailed, "write failed: " + path.string());
}

std::pair<LayerMap, ParamVector> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::OpenFailed, "cannot open: " + path.string());

  ParamVector params;
  std::uint32_t crc = 0;
  HeaderScan scan = scan_layers(is, path, &params, &crc);
  const std::uint32_t stored = get_u32(is);
  if (stored != crc)
    throw IoError(IoError::Kind::CrcMismatch, path.string() + ": payload CRC mismatch");
  scan.map.validate();
  return {std::move(scan.map), std::move(params)};
}

LayerMap read_layer_map(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::OpenFailed, "cannot open: " + path.string());
  HeaderScan scan = scan_layers(is, path, nullptr, nullptr);
  scan.map.validate();
  return scan.map;
}

ParamVector linear_combine(const ParamVector& base,
                           std::span<const std::pair<double, const ParamVector*>> terms) {
  const std::size_t n = base.size();
  std::vector<const double*> vecs;
  std::vector<double> coefs;
  vecs.reserve(terms.size());
  coefs.reserve(terms.size());
  for (const auto& [c, v] : terms) {
    if (v->size() != n)
      throw ShapeError("linear_combine: term length " + std::to_string(v->size()) +
                       " != base length " + std::to_string(n));
    vecs.push_back(v->data());
    coefs.push_back(c);
  }
  ParamVector out(n);
  kernels::combine(base.data(), vecs.data(), coefs.data(), terms.size(), out.data(), n);
  if (!all_finite(out)) throw Error("linear_combine produced non-finite values");
  return out;
}

bool all_finite(const ParamVector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace soupforge
