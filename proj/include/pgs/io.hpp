#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgs/anchor_adjust.hpp"
#include "pgs/bitstream.hpp"
#include "pgs/hash_grid.hpp"
#include "pgs/objectives.hpp"
#include "pgs/octree_store.hpp"

namespace pgs {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

// PLY with float (or double) x, y, z vertex properties, ASCII or
// binary_little_endian.
PointCloud parse_ply(std::span<const std::uint8_t> bytes);
// u64 count followed by count * 3 float32, little-endian.
PointCloud parse_raw_points(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_raw_points(const PointCloud& pc);
// Picks the parser from the extension (.ply) or the PLY magic.
PointCloud load_point_cloud(const std::filesystem::path& path);

// u64 anchor count, then per anchor `rows` float32 gradient magnitudes and
// one float32 opacity.
GaussianStats parse_stats(std::span<const std::uint8_t> bytes, int rows);
std::vector<std::uint8_t> serialize_stats(const GaussianStats& stats);

// Scene file: "PGSC", version, the stream header's config fields, u64 anchor
// count, then per anchor u8 level, 3 x u32 coords and float32 attributes in
// canonical order.
std::vector<std::uint8_t> serialize_scene(const OctreeStore& store);
OctreeStore parse_scene(std::span<const std::uint8_t> bytes);

// Everything a run can be configured with; key=value text, '#' comments.
struct RunConfig {
  OctreeConfig octree;
  double bbox_margin = 0.001;
  AdjustParams adjust;
  LossWeights loss;
  HashGridConfig hash;
  PriorMode prior_mode = PriorMode::kFitted;
  int mlp_hidden = 128;
  double nce_temperature = 0.03;
  int nce_negatives = 100;
  double nce_sample_fraction = 0.05;
  int mi_bins = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

// Throws InvariantError on unknown keys or invalid values.
RunConfig parse_config(std::string_view text);
std::string format_config(const RunConfig& cfg);

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace pgs
