#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "soupforge/errors.hpp"

namespace soupforge {

// Flat, ordered array of float64 parameters. The length is fixed across all
// vectors participating in one soup; every combining routine checks it.
using ParamVector = std::vector<double>;

struct LayerInfo {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::size_t offset = 0;

  std::size_t size() const;

  bool operator==(const LayerInfo&) const = default;
};

// Named, shaped segmentation of a ParamVector. Offsets are contiguous and
// non-overlapping; the layer order is the serialization order.
struct LayerMap {
  std::vector<LayerInfo> layers;
  std::size_t total_len = 0;

  static LayerMap build(
      const std::vector<std::pair<std::string, std::vector<std::uint32_t>>>& shapes);

  std::size_t layer_count() const { return layers.size(); }
  int index_of(std::string_view name) const;  // -1 if absent
  void validate() const;                      // throws ShapeError

  bool operator==(const LayerMap&) const = default;
};

// CRC-32, reflected, polynomial 0xEDB88320 (the zlib/zip one).
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t crc = 0);

// Checkpoint container: "SOUP" magic, u32 version (1), u32 layer count,
// then per layer { u32 name_len, name, u32 ndim, u32 dims[], float64
// little-endian row-major payload }, and a trailing CRC-32 over all payload
// bytes. Write -> read round-trips bit-exactly.
void write_checkpoint(const LayerMap& layers, const ParamVector& params,
                      const std::filesystem::path& path);
std::pair<LayerMap, ParamVector> read_checkpoint(const std::filesystem::path& path);
// Header only; payloads are skipped and the CRC is not verified.
LayerMap read_layer_map(const std::filesystem::path& path);

// out[i] = base[i] + sum_j coef_j * vec_j[i], terms evaluated in list order.
ParamVector linear_combine(const ParamVector& base,
                           std::span<const std::pair<double, const ParamVector*>> terms);

bool all_finite(const ParamVector& v);

}  // namespace soupforge
