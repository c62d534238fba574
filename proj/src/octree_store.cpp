#include "pgs/octree_store.hpp"

#include <algorithm>
#include <sstream>

#include "pgs/error.hpp"

namespace pgs {

namespace {

std::string describe(const VoxelCoord& c) {
  std::ostringstream os;
  os << "level " << c.level << " (" << c.x << ", " << c.y << ", " << c.z << ")";
  return os.str();
}

}  // namespace

OctreeStore::OctreeStore(OctreeConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  levels_.resize(static_cast<std::size_t>(cfg_.num_lods));
}

OctreeStore OctreeStore::build_from_points(const OctreeConfig& cfg, const PointCloud& pc) {
  if (pc.points.empty()) throw InvariantError("build_from_points: empty point cloud");
  OctreeStore store(cfg);
  const int L = cfg.num_lods;
  const std::size_t channels = static_cast<std::size_t>(cfg.channel_count());

  std::vector<std::uint64_t> keys;
  keys.reserve(pc.points.size());
  for (const auto& p : pc.points) keys.push_back(morton_key(voxelize(cfg, p, L)));
  // Attributes are all zero, so "first point wins" reduces to set semantics.
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  for (int l = L; l >= 1; --l) {
    Level& lvl = store.level(l);
    for (std::uint64_t k : keys)
      lvl.emplace_hint(lvl.end(), k, Anchor{from_morton(k, l), std::vector<double>(channels, 0.0)});
    // Parent key is the child key without its octant triple; stays sorted.
    for (auto& k : keys) k >>= 3;
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  }
  return store;
}

bool OctreeStore::in_bounds(const VoxelCoord& c) const {
  if (c.level < 1 || c.level > cfg_.num_lods) return false;
  const std::uint32_t res = cfg_.resolution(c.level);
  return c.x < res && c.y < res && c.z < res;
}

bool OctreeStore::insert(const VoxelCoord& c) {
  return insert(c, std::vector<double>(static_cast<std::size_t>(cfg_.channel_count()), 0.0));
}

bool OctreeStore::insert(const VoxelCoord& c, std::vector<double> attrs) {
  if (!in_bounds(c)) throw InvariantError("insert: coord out of bounds at " + describe(c));
  if (attrs.size() != static_cast<std::size_t>(cfg_.channel_count()))
    throw InvariantError("insert: attribute block has the wrong width");
  if (c.level >= 2 && !contains(parent_coord(c)))
    throw InvariantError("insert: missing parent for " + describe(c));
  auto [it, created] = level(c.level).try_emplace(morton_key(c), Anchor{c, std::move(attrs)});
  return created;
}

bool OctreeStore::remove_leaf(const VoxelCoord& c) {
  if (!contains(c)) throw InvariantError("remove_leaf: no anchor at " + describe(c));
  if (has_children(c)) throw InvariantError("remove_leaf: anchor has children at " + describe(c));
  return level(c.level).erase(morton_key(c)) == 1;
}

bool OctreeStore::contains(const VoxelCoord& c) const { return find(c) != nullptr; }

const Anchor* OctreeStore::find(const VoxelCoord& c) const {
  if (c.level < 1 || c.level > cfg_.num_lods) return nullptr;
  const auto& lvl = level(c.level);
  auto it = lvl.find(morton_key(c));
  return it == lvl.end() ? nullptr : &it->second;
}

Anchor* OctreeStore::find(const VoxelCoord& c) {
  return const_cast<Anchor*>(static_cast<const OctreeStore&>(*this).find(c));
}

std::vector<VoxelCoord> OctreeStore::children_of(const VoxelCoord& c) const {
  std::vector<VoxelCoord> out;
  if (c.level >= cfg_.num_lods) return out;
  const auto& next = level(c.level + 1);
  const std::uint64_t base = morton_key(c) << 3;
  for (auto it = next.lower_bound(base); it != next.end() && it->first < base + 8; ++it)
    out.push_back(it->second.coord);
  return out;
}

bool OctreeStore::has_children(const VoxelCoord& c) const {
  if (c.level >= cfg_.num_lods) return false;
  const auto& next = level(c.level + 1);
  const std::uint64_t base = morton_key(c) << 3;
  auto it = next.lower_bound(base);
  return it != next.end() && it->first < base + 8;
}

std::vector<const Anchor*> OctreeStore::lod_slice(int l) const {
  if (l < 1 || l > cfg_.num_lods) throw InvariantError("lod_slice: level out of range");
  std::vector<const Anchor*> out;
  for (int i = 1; i <= l; ++i)
    for (const auto& [key, a] : level(i)) out.push_back(&a);
  return out;
}

const OctreeStore::Level& OctreeStore::level(int l) const {
  if (l < 1 || l > cfg_.num_lods) throw InvariantError("level index out of range");
  return levels_[static_cast<std::size_t>(l - 1)];
}

OctreeStore::Level& OctreeStore::level(int l) {
  return const_cast<Level&>(static_cast<const OctreeStore&>(*this).level(l));
}

std::size_t OctreeStore::size() const {
  std::size_t n = 0;
  for (const auto& lvl : levels_) n += lvl.size();
  return n;
}

std::vector<std::size_t> OctreeStore::counts_per_level() const {
  std::vector<std::size_t> out;
  for (const auto& lvl : levels_) out.push_back(lvl.size());
  return out;
}

std::optional<std::string> OctreeStore::validate() const {
  const std::size_t channels = static_cast<std::size_t>(cfg_.channel_count());
  for (int l = 1; l <= cfg_.num_lods; ++l) {
    for (const auto& [key, a] : level(l)) {
      if (a.coord.level != l) return "anchor stored at level " + std::to_string(l) + " claims " + describe(a.coord);
      if (!in_bounds(a.coord)) return "out-of-bounds anchor at " + describe(a.coord);
      if (morton_key(a.coord) != key) return "anchor key does not match its coord at " + describe(a.coord);
      if (a.attrs.size() != channels) return "wrong attribute width at " + describe(a.coord);
      if (l >= 2 && !contains(parent_coord(a.coord))) return "missing parent for " + describe(a.coord);
    }
  }
  return std::nullopt;
}

std::string OctreeStore::debug_dump() const {
  std::ostringstream os;
  for (int l = 1; l <= cfg_.num_lods; ++l)
    for (const auto& [key, a] : level(l)) os << l << ' ' << a.coord.x << ' ' << a.coord.y << ' ' << a.coord.z << '\n';
  return os.str();
}

bool same_content(const OctreeStore& a, const OctreeStore& b) {
  if (a.config().num_lods != b.config().num_lods) return false;
  for (int l = 1; l <= a.config().num_lods; ++l) {
    const auto& la = a.level(l);
    const auto& lb = b.level(l);
    if (la.size() != lb.size()) return false;
    for (auto ia = la.begin(), ib = lb.begin(); ia != la.end(); ++ia, ++ib) {
      if (ia->first != ib->first || !(ia->second.coord == ib->second.coord) || ia->second.attrs != ib->second.attrs)
        return false;
    }
  }
  return true;
}

}  // namespace pgs
