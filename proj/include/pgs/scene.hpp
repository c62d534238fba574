#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pgs {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

// Attribute channel groups: feature f, scaling s, offsets o (D_o rows of 3).
enum class ChannelGroup : std::uint8_t { kFeature = 0, kScaling = 1, kOffset = 2 };

struct OctreeConfig {
  int base_depth = 11;  // l_b
  int num_lods = 5;     // L
  Vec3 bbox_min{0.0, 0.0, 0.0};
  double bbox_side = 1.0;  // v_B
  int dim_feature = 32;
  int dim_scaling = 6;
  int dim_offsets = 10;
  double q0_feature = 1.0;
  double q0_scaling = 0.001;
  double q0_offset = 0.2;

  // Throws InvariantError when a field is out of range. base_depth + num_lods
  // is capped at 21 so that Morton keys fit in 63 bits.
  void validate() const;

  int channel_count() const { return dim_feature + dim_scaling + 3 * dim_offsets; }
  ChannelGroup group_of(int channel) const;
  double q0_of(int channel) const;
  // Grid resolution per axis at level l, 2^(l_b + l).
  std::uint32_t resolution(int level) const;
};

struct VoxelCoord {
  std::uint32_t x = 0, y = 0, z = 0;
  int level = 1;

  friend bool operator==(const VoxelCoord&, const VoxelCoord&) = default;
};

struct VoxelCoordHash {
  std::size_t operator()(const VoxelCoord& c) const noexcept;
};

// Flat attribute block: [f (D_f) | s (D_s) | o (D_o x 3, row-major)].
struct Anchor {
  VoxelCoord coord;
  std::vector<double> attrs;
};

struct PointCloud {
  std::vector<Vec3> points;
};

// Per-anchor gradient magnitudes (one per offset row) and accumulated
// opacity, aligned to the store's canonical anchor order.
struct GaussianStats {
  int rows_per_anchor = 0;
  std::vector<double> grad_mags;  // anchor-major, rows_per_anchor entries each
  std::vector<double> opacity;

  std::size_t anchor_count() const { return opacity.size(); }
  std::span<const double> grads_of(std::size_t anchor) const {
    return std::span<const double>(grad_mags).subspan(anchor * rows_per_anchor, rows_per_anchor);
  }
};

struct BoundingCube {
  Vec3 min{0.0, 0.0, 0.0};
  double side = 1.0;
};

// Ties round toward +inf. A relative slack of 1e-12 absorbs decimal inputs
// whose binary quotient lands one ulp below the tie (0.3 / 0.2 and friends).
double round_half_up(double x);

double voxel_size(const OctreeConfig& cfg, int level);

BoundingCube estimate_bbox(const PointCloud& pc, double margin = 0.001);

VoxelCoord voxelize(const OctreeConfig& cfg, const Vec3& position, int level);

// True iff the position lies inside the closed bounding cube.
bool inside_cube(const OctreeConfig& cfg, const Vec3& position);

VoxelCoord parent_coord(const VoxelCoord& c);
unsigned octant_code(const VoxelCoord& c);
VoxelCoord child_coord(const VoxelCoord& parent, unsigned octant);

// Bit-interleaved key, x in the least significant slot of each triple.
std::uint64_t morton_key(const VoxelCoord& c);
VoxelCoord from_morton(std::uint64_t key, int level);

// Voxel corner: bbox_min + coord * v_l.
Vec3 canonical_position(const OctreeConfig& cfg, const VoxelCoord& c);

// Position scaled into the unit cube, (p - bbox_min) / v_B.
Vec3 normalized_position(const OctreeConfig& cfg, const VoxelCoord& c);

std::vector<Vec3> expand_gaussians(const Anchor& a, const OctreeConfig& cfg);

}  // namespace pgs
