#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "pgs/octree_store.hpp"

namespace pgs {

struct AdjustParams {
  double tau_g = 5e-5;
  double beta = 0.01;
  double tau_o = 0.5;
  int period = 100;  // iterations between adjustments; carried for the trainer, unused here

  void validate() const;
};

enum class Significance { kNonSignificant, kSignificant, kVerySignificant };

// tau_g * 2^(beta * l)
double level_threshold(const AdjustParams& p, int level);

Significance classify(double grad_mag, const AdjustParams& p, int level);

struct GrowReport {
  // Index l - 1 for level l.
  std::vector<std::size_t> candidates_per_level;
  std::vector<std::size_t> spawned_per_level;
  std::size_t spawned = 0;
  // Gaussians whose centers left the bounding cube and produced no candidate.
  std::size_t outside_cube = 0;
};

struct PruneReport {
  std::vector<std::size_t> pruned_per_level;
  std::size_t pruned = 0;
};

struct AdjustReport {
  GrowReport grow;
  PruneReport prune;
  std::vector<std::size_t> anchor_counts_after;
};

// Gradient-driven growing, fine-to-coarse over levels L..1. `stats` must be
// aligned to store.lod_slice(L) at call time. Candidates are inserted
// parent-before-child; occupied targets are dropped.
GrowReport grow(OctreeStore& store, const GaussianStats& stats, const AdjustParams& p);

// Removes childless anchors with opacity <= tau_o until nothing changes.
// `stats` must be aligned to store.lod_slice(L).
PruneReport prune(OctreeStore& store, const GaussianStats& stats, const AdjustParams& p);

// Same cascade with an arbitrary opacity source; anchors for which the
// lookup yields nullopt are never pruned.
using OpacityLookup = std::function<std::optional<double>(const VoxelCoord&)>;
PruneReport prune(OctreeStore& store, const OpacityLookup& opacity, const AdjustParams& p);

// grow, then prune with the pre-grow opacities (fresh anchors are exempt
// until they have statistics of their own).
AdjustReport adjust_step(OctreeStore& store, const GaussianStats& stats, const AdjustParams& p);

}  // namespace pgs
