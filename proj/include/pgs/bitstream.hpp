#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pgs/entropy_model.hpp"
#include "pgs/hash_grid.hpp"
#include "pgs/octree_store.hpp"

namespace pgs {

inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr int kParentIndexBits = 20;
inline constexpr int kOctantBits = 3;
inline constexpr std::uint32_t kMaxParentIndex = (1u << kParentIndexBits) - 1;

enum class PriorMode : std::uint8_t { kFitted = 0, kMlp = 1 };

// Stream header. Q0 travels as float32; the coding path always works from
// the header values so encoder and decoder see identical steps.
struct Header {
  OctreeConfig config;
  PriorMode mode = PriorMode::kFitted;
  std::optional<HashGrid> grid;                        // mode == kMlp
  std::optional<MlpWeights> weights;                   // mode == kMlp
  std::vector<std::vector<ChannelPrior>> level_priors;  // mode == kFitted, one per level

  std::vector<std::uint8_t> serialize() const;
  // Parses a header at the start of `bytes`; `consumed` receives its length.
  static Header parse(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);
};

// What the encoder needs besides the anchors.
struct CodingModel {
  PriorMode mode = PriorMode::kFitted;
  std::optional<HashGrid> grid;
  std::optional<MlpWeights> weights;

  static CodingModel fitted() { return {}; }
  static CodingModel mlp(HashGrid grid, MlpWeights weights) {
    return {PriorMode::kMlp, std::move(grid), std::move(weights)};
  }
};

// Structural block of one level >= 2: per anchor the 20-bit index of its
// parent within `previous_level` (Morton-sorted) and the 3-bit octant,
// MSB-first. Throws InvariantError naming `level` on index overflow.
std::vector<std::uint8_t> encode_structural(std::span<const VoxelCoord> anchors,
                                            std::span<const VoxelCoord> previous_level, int level);
std::vector<VoxelCoord> decode_structural(std::span<const std::uint8_t> block, std::size_t count,
                                          std::span<const VoxelCoord> previous_level);

// Level-1 coordinates, 3 x u32 each.
std::vector<std::uint8_t> encode_level1_coords(std::span<const VoxelCoord> roots);
std::vector<VoxelCoord> decode_level1_coords(std::span<const std::uint8_t> block, std::size_t count);

// Number of bytes the structural block of `count` anchors at `level` takes.
std::size_t structural_block_size(int level, std::size_t count);

struct EncodedScene {
  std::vector<std::uint8_t> bytes;
  // The store as the decoder will see it: identical coords, attributes
  // replaced by their quantized reconstructions.
  OctreeStore reconstruction;
};

EncodedScene encode_scene(const OctreeStore& store, const CodingModel& model);

struct DecodedScene {
  Header header;
  OctreeStore store;
  int levels_decoded = 0;
  std::size_t bytes_read = 0;  // header plus the decoded chunks
};

// Decodes the header and chunks 1..k. Throws FormatError on malformed or
// truncated input and InvariantError when the rebuilt tree is invalid.
DecodedScene decode_prefix(std::span<const std::uint8_t> bytes, int k);

struct ChunkReport {
  int level = 0;
  std::size_t anchors = 0;
  std::size_t framing_bytes = 0;  // level, count and payload-length fields
  std::size_t structural_bytes = 0;
  std::size_t attribute_bytes = 0;
  std::size_t total() const { return framing_bytes + structural_bytes + attribute_bytes; }
};

struct InspectReport {
  PriorMode mode = PriorMode::kFitted;
  std::size_t header_bytes = 0;
  std::size_t header_fixed_bytes = 0;  // magic, version, config, mode flag
  std::size_t grid_bytes = 0;          // including its length prefix
  std::size_t weights_bytes = 0;       // including its length prefix
  std::size_t prior_table_bytes = 0;
  std::vector<ChunkReport> chunks;
  std::size_t total_bytes = 0;
};

// Byte accounting without decoding attributes; totals equal bytes.size().
InspectReport inspect(std::span<const std::uint8_t> bytes);

}  // namespace pgs
