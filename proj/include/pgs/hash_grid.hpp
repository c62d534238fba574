#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgs/scene.hpp"

namespace pgs {

struct HashGridConfig {
  int levels_3d = 12;
  int min_res_3d = 16;
  int max_res_3d = 512;
  int levels_2d = 4;
  int min_res_2d = 128;
  int max_res_2d = 1024;
  int feature_dim = 4;
  int log2_table_size = 13;

  void validate() const;

  int level_count() const { return levels_3d + levels_2d; }
  std::size_t table_size() const { return std::size_t{1} << log2_table_size; }
  // Width of one query result: (levels_3d + levels_2d) * feature_dim.
  int output_dim() const { return level_count() * feature_dim; }
  // Total sign entries M.
  std::size_t entry_count() const { return static_cast<std::size_t>(level_count()) * table_size() * feature_dim; }

  // Geometric progression min..max, rounded to integers.
  std::vector<int> resolutions_3d() const;
  std::vector<int> resolutions_2d() const;
};

// Multi-resolution hash grid whose entries are binarized to -1/+1. The 3D
// branch interpolates trilinearly; the 2D branch averages bilinear lookups
// on the xy, xz and yz projections. Immutable once built.
class HashGrid {
 public:
  explicit HashGrid(HashGridConfig cfg);  // all entries +1

  static HashGrid seeded(const HashGridConfig& cfg, std::uint64_t seed);

  const HashGridConfig& config() const { return cfg_; }

  // position in [0,1]^3; throws InvariantError otherwise.
  std::vector<double> query(const Vec3& position) const;

  std::int8_t entry(std::size_t level, std::size_t index, int feature) const;
  void set_entry(std::size_t level, std::size_t index, int feature, std::int8_t sign);
  std::span<const std::int8_t> entries() const { return signs_; }

  std::size_t positive_count() const;

  // Config block followed by the packed sign bits (the block embedded in
  // stream headers). parse() consumes exactly what serialize() produced.
  std::vector<std::uint8_t> serialize() const;
  static HashGrid deserialize(std::span<const std::uint8_t> block);

  // Grid file: "PGH1" + serialize().
  std::vector<std::uint8_t> to_file_bytes() const;
  static HashGrid from_file_bytes(std::span<const std::uint8_t> bytes);

  friend bool operator==(const HashGrid& a, const HashGrid& b);

 private:
  std::size_t slot(std::size_t level, std::size_t index) const {
    return (level * cfg_.table_size() + index) * static_cast<std::size_t>(cfg_.feature_dim);
  }

  HashGridConfig cfg_;
  std::vector<int> res3_, res2_;
  std::vector<std::int8_t> signs_;
};

// Bernoulli cross-entropy storage estimate of the sign table, in bits.
double hash_bit_cost(const HashGrid& grid);

// Context for anchors without a parent.
std::vector<double> root_parent_context(const HashGridConfig& cfg);

std::uint32_t spatial_hash(std::uint32_t x, std::uint32_t y, std::uint32_t z, std::size_t table_size);

}  // namespace pgs
