#include "pgs/anchor_adjust.hpp"

#include <cmath>
#include <set>
#include <string>

#include "pgs/error.hpp"

namespace pgs {

void AdjustParams::validate() const {
  if (!(tau_g > 0.0)) throw InvariantError("tau_g must be positive");
  if (!std::isfinite(beta)) throw InvariantError("beta must be finite");
  if (!std::isfinite(tau_o)) throw InvariantError("tau_o must be finite");
  if (period < 1) throw InvariantError("period must be >= 1");
}

double level_threshold(const AdjustParams& p, int level) { return p.tau_g * std::exp2(p.beta * level); }

Significance classify(double grad_mag, const AdjustParams& p, int level) {
  if (grad_mag > level_threshold(p, level + 1)) return Significance::kVerySignificant;
  if (grad_mag > level_threshold(p, level)) return Significance::kSignificant;
  return Significance::kNonSignificant;
}

namespace {

void check_alignment(const OctreeStore& store, const GaussianStats& stats) {
  const auto& cfg = store.config();
  if (stats.rows_per_anchor != cfg.dim_offsets)
    throw InvariantError("stats: expected " + std::to_string(cfg.dim_offsets) + " gradient rows per anchor, got " +
                         std::to_string(stats.rows_per_anchor));
  if (stats.anchor_count() != store.size() ||
      stats.grad_mags.size() != stats.anchor_count() * static_cast<std::size_t>(stats.rows_per_anchor))
    throw InvariantError("stats: " + std::to_string(stats.anchor_count()) + " entries for " +
                         std::to_string(store.size()) + " anchors");
}

}  // namespace

GrowReport grow(OctreeStore& store, const GaussianStats& stats, const AdjustParams& p) {
  check_alignment(store, stats);
  const auto& cfg = store.config();
  const int L = cfg.num_lods;

  GrowReport report;
  report.candidates_per_level.assign(static_cast<std::size_t>(L), 0);
  report.spawned_per_level.assign(static_cast<std::size_t>(L), 0);

  // Canonical index of the first anchor of each level within lod_slice(L).
  std::vector<std::size_t> level_offset(static_cast<std::size_t>(L) + 1, 0);
  for (int l = 1; l <= L; ++l) level_offset[static_cast<std::size_t>(l)] = level_offset[l - 1] + store.count(l);

  // candidates[l] holds Morton keys of level-l targets; ordered sets keep
  // insertion deterministic.
  std::vector<std::set<std::uint64_t>> candidates(static_cast<std::size_t>(L) + 2);

  for (int l = L; l >= 1; --l) {
    const double thr_here = level_threshold(p, l);
    const double thr_next = level_threshold(p, l + 1);
    std::size_t index = level_offset[static_cast<std::size_t>(l - 1)];
    for (const auto& [key, anchor] : store.level(l)) {
      const auto grads = stats.grads_of(index++);
      const auto centers = expand_gaussians(anchor, cfg);
      for (int j = 0; j < cfg.dim_offsets; ++j) {
        const double g = grads[static_cast<std::size_t>(j)];
        int target;
        if (g > thr_next && l < L)
          target = l + 1;
        else if (g > thr_here)
          target = l;
        else
          continue;
        if (!inside_cube(cfg, centers[static_cast<std::size_t>(j)])) {
          ++report.outside_cube;
          continue;
        }
        candidates[static_cast<std::size_t>(target)].insert(
            morton_key(voxelize(cfg, centers[static_cast<std::size_t>(j)], target)));
      }
    }
    // Next-level candidates without an existing parent queue one at level l.
    if (l < L) {
      for (std::uint64_t child : candidates[static_cast<std::size_t>(l + 1)]) {
        const std::uint64_t parent = child >> 3;
        if (!store.level(l).contains(parent)) candidates[static_cast<std::size_t>(l)].insert(parent);
      }
    }
  }

  // Every level-l candidate's parent is either stored or a level-(l-1)
  // candidate, so coarse-to-fine insertion never violates the parent rule.
  for (int l = 1; l <= L; ++l) {
    const auto& cand = candidates[static_cast<std::size_t>(l)];
    report.candidates_per_level[static_cast<std::size_t>(l - 1)] = cand.size();
    for (std::uint64_t key : cand) {
      if (store.insert(from_morton(key, l))) {
        ++report.spawned_per_level[static_cast<std::size_t>(l - 1)];
        ++report.spawned;
      }
    }
  }
  return report;
}

PruneReport prune(OctreeStore& store, const OpacityLookup& opacity, const AdjustParams& p) {
  const int L = store.config().num_lods;
  PruneReport report;
  report.pruned_per_level.assign(static_cast<std::size_t>(L), 0);
  // A removal at level l can only expose new leaves at level l - 1, so one
  // fine-to-coarse sweep reaches the fixed point.
  for (int l = L; l >= 1; --l) {
    auto& lvl = store.level(l);
    for (auto it = lvl.begin(); it != lvl.end();) {
      const VoxelCoord c = it->second.coord;
      const auto op = opacity(c);
      if (op && *op <= p.tau_o && !store.has_children(c)) {
        it = lvl.erase(it);
        ++report.pruned_per_level[static_cast<std::size_t>(l - 1)];
        ++report.pruned;
      } else {
        ++it;
      }
    }
  }
  return report;
}

PruneReport prune(OctreeStore& store, const GaussianStats& stats, const AdjustParams& p) {
  check_alignment(store, stats);
  std::unordered_map<VoxelCoord, double, VoxelCoordHash> by_coord;
  std::size_t i = 0;
  for (const Anchor* a : store.lod_slice(store.config().num_lods)) by_coord.emplace(a->coord, stats.opacity[i++]);
  return prune(
      store,
      [&](const VoxelCoord& c) -> std::optional<double> {
        auto it = by_coord.find(c);
        if (it == by_coord.end()) return std::nullopt;
        return it->second;
      },
      p);
}

AdjustReport adjust_step(OctreeStore& store, const GaussianStats& stats, const AdjustParams& p) {
  check_alignment(store, stats);
  std::unordered_map<VoxelCoord, double, VoxelCoordHash> by_coord;
  std::size_t i = 0;
  for (const Anchor* a : store.lod_slice(store.config().num_lods)) by_coord.emplace(a->coord, stats.opacity[i++]);

  AdjustReport report;
  report.grow = grow(store, stats, p);
  report.prune = prune(
      store,
      [&](const VoxelCoord& c) -> std::optional<double> {
        auto it = by_coord.find(c);
        if (it == by_coord.end()) return std::nullopt;
        return it->second;
      },
      p);
  report.anchor_counts_after = store.counts_per_level();
  if (auto violation = store.validate()) throw InvariantError("adjust_step left an invalid store: " + *violation);
  return report;
}

}  // namespace pgs
