#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "pgs/error.hpp"
#include "pgs/octree_store.hpp"
#include "test_util.hpp"

namespace pgs {
namespace {

using testing::Rng;
using Cell = std::tuple<int, std::uint32_t, std::uint32_t, std::uint32_t>;

// Per-level voxel sets computed straight from the points, using floor
// division for the coarser levels.
std::set<Cell> reference_cells(const OctreeConfig& cfg, const PointCloud& pc) {
  std::set<Cell> cells;
  const int L = cfg.num_lods;
  const double v = cfg.bbox_side / std::pow(2.0, cfg.base_depth + L);
  const double top = std::pow(2.0, cfg.base_depth + L) - 1;
  for (const auto& p : pc.points) {
    std::uint32_t idx[3];
    for (int a = 0; a < 3; ++a) {
      double r = std::floor((p[a] - cfg.bbox_min[a]) / v + 0.5);
      idx[a] = static_cast<std::uint32_t>(std::min(std::max(r, 0.0), top));
    }
    for (int l = L; l >= 1; --l) {
      const int s = L - l;
      cells.emplace(l, idx[0] >> s, idx[1] >> s, idx[2] >> s);
    }
  }
  return cells;
}

std::set<Cell> store_cells(const OctreeStore& s) {
  std::set<Cell> cells;
  for (const Anchor* a : s.lod_slice(s.config().num_lods))
    cells.emplace(a->coord.level, a->coord.x, a->coord.y, a->coord.z);
  return cells;
}

TEST(BuildFromPoints, SinglePointGivesOneChain) {
  OctreeConfig cfg;
  const auto s = OctreeStore::build_from_points(cfg, {{{0.3, 0.6, 0.9}}});
  EXPECT_EQ(s.size(), static_cast<std::size_t>(cfg.num_lods));
  for (int l = 1; l <= cfg.num_lods; ++l) EXPECT_EQ(s.count(l), 1u);
  EXPECT_FALSE(s.validate());
}

TEST(BuildFromPoints, DuplicateVoxelDeduplicates) {
  OctreeConfig cfg = testing::small_config(2, 3);
  const double v = voxel_size(cfg, 3);
  const auto one = OctreeStore::build_from_points(cfg, {{{0.5, 0.5, 0.5}}});
  const auto two = OctreeStore::build_from_points(cfg, {{{0.5, 0.5, 0.5}, {0.5 + v * 0.1, 0.5, 0.5}}});
  EXPECT_TRUE(same_content(one, two));
}

TEST(BuildFromPoints, MatchesSetReference) {
  Rng rng(17);
  for (int t = 0; t < 30; ++t) {
    OctreeConfig cfg = testing::small_config(static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 5));
    cfg.bbox_min = {-1.0, 2.0, 0.5};
    cfg.bbox_side = 2.5;
    const auto pc = testing::random_cloud(rng, cfg, 100);
    const auto s = OctreeStore::build_from_points(cfg, pc);
    EXPECT_FALSE(s.validate());
    EXPECT_EQ(store_cells(s), reference_cells(cfg, pc));
    const auto counts = s.counts_per_level();
    for (std::size_t i = 1; i < counts.size(); ++i) EXPECT_LE(counts[i - 1], counts[i]);
  }
}

TEST(BuildFromPoints, RejectsOutsidePoints) {
  OctreeConfig cfg;
  EXPECT_THROW(OctreeStore::build_from_points(cfg, {{{2.0, 0.0, 0.0}}}), InvariantError);
}

TEST(Insert, Examples) {
  OctreeConfig cfg = testing::small_config(1, 3);
  OctreeStore s(cfg);
  EXPECT_TRUE(s.insert({1, 1, 1, 1}));
  EXPECT_TRUE(s.insert({2, 3, 2, 2}));
  const auto before = s.debug_dump();
  EXPECT_FALSE(s.insert({2, 3, 2, 2}));
  EXPECT_EQ(s.debug_dump(), before);
  EXPECT_THROW(s.insert({0, 0, 0, 3}), InvariantError);
  EXPECT_THROW(s.insert({4, 0, 0, 1}), InvariantError);
  EXPECT_THROW(s.insert({0, 0, 0, 4}), InvariantError);
  EXPECT_THROW(s.insert({1, 1, 0, 1}, std::vector<double>(3)), InvariantError);
  EXPECT_EQ(s.find({2, 3, 2, 2})->attrs.size(), static_cast<std::size_t>(cfg.channel_count()));
}

TEST(RemoveLeaf, OnlyChildless) {
  OctreeConfig cfg = testing::small_config(1, 3);
  OctreeStore s(cfg);
  s.insert({1, 1, 1, 1});
  s.insert({2, 2, 2, 2});
  EXPECT_THROW(s.remove_leaf({1, 1, 1, 1}), InvariantError);
  EXPECT_THROW(s.remove_leaf({0, 0, 0, 1}), InvariantError);
  EXPECT_TRUE(s.remove_leaf({2, 2, 2, 2}));
  EXPECT_TRUE(s.remove_leaf({1, 1, 1, 1}));
  EXPECT_EQ(s.size(), 0u);
}

TEST(ChildrenOf, ListsOccupiedChildren) {
  OctreeConfig cfg = testing::small_config(1, 3);
  OctreeStore s(cfg);
  s.insert({1, 0, 1, 1});
  s.insert({2, 0, 2, 2});
  s.insert({3, 1, 3, 2});
  const auto kids = s.children_of({1, 0, 1, 1});
  EXPECT_EQ(kids.size(), 2u);
  EXPECT_TRUE(s.has_children({1, 0, 1, 1}));
  EXPECT_FALSE(s.has_children({2, 0, 2, 2}));
}

TEST(LodSlice, PrefixProperty) {
  Rng rng(23);
  for (int t = 0; t < 20; ++t) {
    const OctreeConfig cfg = testing::small_config(2, 4);
    const auto s = testing::random_store(rng, cfg, 60);
    EXPECT_EQ(s.lod_slice(4).size(), s.size());
    EXPECT_EQ(s.lod_slice(1).size(), s.count(1));
    for (int l = 1; l < 4; ++l) {
      const auto a = s.lod_slice(l);
      const auto b = s.lod_slice(l + 1);
      ASSERT_LE(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
      for (std::size_t i = a.size(); i < b.size(); ++i) EXPECT_EQ(b[i]->coord.level, l + 1);
    }
    // Morton order within each level.
    const auto all = s.lod_slice(4);
    for (std::size_t i = 1; i < all.size(); ++i)
      if (all[i]->coord.level == all[i - 1]->coord.level)
        EXPECT_LT(morton_key(all[i - 1]->coord), morton_key(all[i]->coord));
  }
}

TEST(Validate, ReportsOrphans) {
  OctreeConfig cfg = testing::small_config(1, 3);
  OctreeStore s(cfg);
  s.insert({1, 1, 1, 1});
  s.insert({2, 2, 2, 2});
  EXPECT_FALSE(s.validate());
  // Bypass insert() to plant an orphan.
  s.level(3).emplace(morton_key({7, 7, 7, 3}),
                     Anchor{{7, 7, 7, 3}, std::vector<double>(static_cast<std::size_t>(cfg.channel_count()))});
  const auto v = s.validate();
  ASSERT_TRUE(v);
  EXPECT_NE(v->find("(7, 7, 7)"), std::string::npos) << *v;
}

TEST(DebugDump, Format) {
  OctreeConfig cfg = testing::small_config(1, 2);
  OctreeStore s(cfg);
  s.insert({1, 0, 1, 1});
  s.insert({3, 1, 2, 2});
  EXPECT_EQ(s.debug_dump(), "1 1 0 1\n2 3 1 2\n");
}

}  // namespace
}  // namespace pgs
