#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pgs/scene.hpp"

namespace pgs {

// Level-indexed anchor container. Each level is a map keyed by Morton code,
// so iterating a level yields the canonical (Morton) order directly.
//
// Invariants kept by every mutating member:
//   - one anchor per (level, coord)
//   - every anchor at level >= 2 has its parent voxel occupied
//   - all coords inside the level's grid
class OctreeStore {
 public:
  using Level = std::map<std::uint64_t, Anchor>;

  explicit OctreeStore(OctreeConfig cfg);

  // Voxelizes every point at level L (first point per voxel wins) and
  // materializes the ancestor chains. Attributes start at zero.
  static OctreeStore build_from_points(const OctreeConfig& cfg, const PointCloud& pc);

  const OctreeConfig& config() const { return cfg_; }

  // Returns false (and leaves the store untouched) when the voxel is taken.
  // Throws InvariantError for out-of-bounds coords or a missing parent.
  bool insert(const VoxelCoord& c);
  // Inserts with the given attribute block; used by decoders and loaders.
  bool insert(const VoxelCoord& c, std::vector<double> attrs);

  // Removes a childless anchor. Throws if the anchor is absent or has children.
  bool remove_leaf(const VoxelCoord& c);

  bool contains(const VoxelCoord& c) const;
  const Anchor* find(const VoxelCoord& c) const;
  Anchor* find(const VoxelCoord& c);

  std::vector<VoxelCoord> children_of(const VoxelCoord& c) const;
  bool has_children(const VoxelCoord& c) const;

  // Anchors with level <= l, level-major then Morton order.
  std::vector<const Anchor*> lod_slice(int l) const;

  const Level& level(int l) const;
  Level& level(int l);

  std::size_t size() const;
  std::size_t count(int l) const { return level(l).size(); }
  std::vector<std::size_t> counts_per_level() const;

  // nullopt when every invariant holds; otherwise names the first violation.
  std::optional<std::string> validate() const;

  // "level ix iy iz" per line, canonical order.
  std::string debug_dump() const;

  bool in_bounds(const VoxelCoord& c) const;

 private:
  OctreeConfig cfg_;
  std::vector<Level> levels_;  // index l - 1
};

// Content equality: same config-independent coords and attribute blocks.
bool same_content(const OctreeStore& a, const OctreeStore& b);

}  // namespace pgs
