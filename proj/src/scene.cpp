#include "pgs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pgs/error.hpp"

namespace pgs {

namespace {

// Spread the low 21 bits of v so that bit i lands at bit 3i.
std::uint64_t spread3(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffffULL;
  v = (v | v << 16) & 0x1f0000ff0000ffULL;
  v = (v | v << 8) & 0x100f00f00f00f00fULL;
  v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
  v = (v | v << 2) & 0x1249249249249249ULL;
  return v;
}

std::uint32_t compact3(std::uint64_t v) {
  v &= 0x1249249249249249ULL;
  v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
  v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
  v = (v ^ (v >> 8)) & 0x1f0000ff0000ffULL;
  v = (v ^ (v >> 16)) & 0x1f00000000ffffULL;
  v = (v ^ (v >> 32)) & 0x1fffffULL;
  return static_cast<std::uint32_t>(v);
}

void check_level(const OctreeConfig& cfg, int level) {
  if (level < 1 || level > cfg.num_lods)
    throw InvariantError("level " + std::to_string(level) + " outside [1, " + std::to_string(cfg.num_lods) + "]");
}

}  // namespace

void OctreeConfig::validate() const {
  if (bbox_side <= 0.0 || !std::isfinite(bbox_side)) throw InvariantError("bbox_side must be positive");
  if (num_lods < 1) throw InvariantError("num_lods must be >= 1");
  if (base_depth < 0) throw InvariantError("base_depth must be >= 0");
  if (base_depth + num_lods > 21) throw InvariantError("base_depth + num_lods must be <= 21");
  if (dim_feature < 0 || dim_scaling < 0 || dim_offsets < 0) throw InvariantError("attribute dims must be >= 0");
  if (dim_feature > 0xffff || dim_scaling > 0xffff || dim_offsets > 0xffff)
    throw InvariantError("attribute dims must fit in 16 bits");
  if (!(q0_feature > 0.0) || !(q0_scaling > 0.0) || !(q0_offset > 0.0))
    throw InvariantError("quantization steps must be positive");
  for (double v : bbox_min)
    if (!std::isfinite(v)) throw InvariantError("bbox_min must be finite");
}

ChannelGroup OctreeConfig::group_of(int channel) const {
  if (channel < dim_feature) return ChannelGroup::kFeature;
  if (channel < dim_feature + dim_scaling) return ChannelGroup::kScaling;
  return ChannelGroup::kOffset;
}

double OctreeConfig::q0_of(int channel) const {
  switch (group_of(channel)) {
    case ChannelGroup::kFeature:
      return q0_feature;
    case ChannelGroup::kScaling:
      return q0_scaling;
    case ChannelGroup::kOffset:
      break;
  }
  return q0_offset;
}

std::uint32_t OctreeConfig::resolution(int level) const { return std::uint32_t{1} << (base_depth + level); }

std::size_t VoxelCoordHash::operator()(const VoxelCoord& c) const noexcept {
  return std::hash<std::uint64_t>{}(morton_key(c) * 31 + static_cast<std::uint64_t>(c.level));
}

double round_half_up(double x) {
  constexpr double kTieSlack = 1e-12;
  return std::floor(x + 0.5 + kTieSlack * std::max(1.0, std::abs(x)));
}

double voxel_size(const OctreeConfig& cfg, int level) {
  check_level(cfg, level);
  return std::ldexp(cfg.bbox_side, -(cfg.base_depth + level));
}

BoundingCube estimate_bbox(const PointCloud& pc, double margin) {
  if (pc.points.empty()) throw InvariantError("estimate_bbox: empty point cloud");
  if (margin < 0.0) throw InvariantError("estimate_bbox: negative margin");
  Vec3 lo = pc.points.front();
  Vec3 hi = lo;
  for (const auto& p : pc.points) {
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(p[a])) throw InvariantError("estimate_bbox: non-finite point");
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  // A single distinct point has no extent; give it a unit cube.
  if (extent <= 0.0) extent = 1.0;
  BoundingCube box;
  for (int a = 0; a < 3; ++a) box.min[a] = lo[a] - margin * extent;
  box.side = extent * (1.0 + 2.0 * margin);
  return box;
}

bool inside_cube(const OctreeConfig& cfg, const Vec3& position) {
  for (int a = 0; a < 3; ++a) {
    double rel = position[a] - cfg.bbox_min[a];
    if (!(rel >= 0.0 && rel <= cfg.bbox_side)) return false;
  }
  return true;
}

VoxelCoord voxelize(const OctreeConfig& cfg, const Vec3& position, int level) {
  double v = voxel_size(cfg, level);
  if (!inside_cube(cfg, position)) throw InvariantError("voxelize: position outside the bounding cube");
  const double max_index = static_cast<double>(cfg.resolution(level) - 1);
  std::array<std::uint32_t, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    double r = round_half_up((position[a] - cfg.bbox_min[a]) / v);
    idx[a] = static_cast<std::uint32_t>(std::clamp(r, 0.0, max_index));
  }
  return {idx[0], idx[1], idx[2], level};
}

VoxelCoord parent_coord(const VoxelCoord& c) {
  if (c.level < 2) throw InvariantError("parent_coord: level-1 anchors have no parent");
  return {c.x >> 1, c.y >> 1, c.z >> 1, c.level - 1};
}

unsigned octant_code(const VoxelCoord& c) {
  if (c.level < 2) throw InvariantError("octant_code: level-1 anchors have no parent");
  return (c.x & 1u) | ((c.y & 1u) << 1) | ((c.z & 1u) << 2);
}

VoxelCoord child_coord(const VoxelCoord& parent, unsigned octant) {
  return {(parent.x << 1) | (octant & 1u), (parent.y << 1) | ((octant >> 1) & 1u),
          (parent.z << 1) | ((octant >> 2) & 1u), parent.level + 1};
}

std::uint64_t morton_key(const VoxelCoord& c) {
  return spread3(c.x) | (spread3(c.y) << 1) | (spread3(c.z) << 2);
}

VoxelCoord from_morton(std::uint64_t key, int level) {
  return {compact3(key), compact3(key >> 1), compact3(key >> 2), level};
}

Vec3 canonical_position(const OctreeConfig& cfg, const VoxelCoord& c) {
  double v = voxel_size(cfg, c.level);
  return {cfg.bbox_min[0] + c.x * v, cfg.bbox_min[1] + c.y * v, cfg.bbox_min[2] + c.z * v};
}

Vec3 normalized_position(const OctreeConfig& cfg, const VoxelCoord& c) {
  const int shift = cfg.base_depth + c.level;
  return {std::ldexp(c.x, -shift), std::ldexp(c.y, -shift), std::ldexp(c.z, -shift)};
}

std::vector<Vec3> expand_gaussians(const Anchor& a, const OctreeConfig& cfg) {
  const Vec3 base = canonical_position(cfg, a.coord);
  const std::size_t off = static_cast<std::size_t>(cfg.dim_feature + cfg.dim_scaling);
  if (a.attrs.size() != static_cast<std::size_t>(cfg.channel_count()))
    throw InvariantError("expand_gaussians: attribute block has the wrong width");
  std::vector<Vec3> centers;
  centers.reserve(cfg.dim_offsets);
  for (int j = 0; j < cfg.dim_offsets; ++j) {
    const double* row = a.attrs.data() + off + 3 * j;
    centers.push_back({base[0] + row[0], base[1] + row[1], base[2] + row[2]});
  }
  return centers;
}

}  // namespace pgs
