#include "pgs/hash_grid.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pgs/byte_io.hpp"
#include "pgs/error.hpp"

namespace pgs {

namespace {

constexpr std::uint32_t kPrimeY = 2654435761u;
constexpr std::uint32_t kPrimeZ = 805459861u;
constexpr double kSignEpsilon = 1.0 / 65536.0;  // clamp on the +1 frequency

std::vector<int> geometric(int n, int lo, int hi) {
  std::vector<int> out;
  if (n <= 0) return out;
  if (n == 1) return {lo};
  const double growth = std::exp((std::log(hi) - std::log(lo)) / (n - 1));
  for (int i = 0; i < n; ++i) out.push_back(static_cast<int>(std::lround(lo * std::pow(growth, i))));
  return out;
}

// Cell index and fractional offset along one axis of a resolution-r grid.
inline void locate(double u, int r, std::uint32_t& cell, double& frac) {
  const double s = u * r;
  double f = std::floor(s);
  if (f > r - 1) f = r - 1;
  cell = static_cast<std::uint32_t>(f);
  frac = s - f;
}

}  // namespace

std::uint32_t spatial_hash(std::uint32_t x, std::uint32_t y, std::uint32_t z, std::size_t table_size) {
  const std::uint32_t h = x ^ (y * kPrimeY) ^ (z * kPrimeZ);
  return static_cast<std::uint32_t>(h & (table_size - 1));
}

void HashGridConfig::validate() const {
  if (levels_3d < 0 || levels_2d < 0 || levels_3d > 255 || levels_2d > 255)
    throw InvariantError("hash grid: level counts must be in [0, 255]");
  if (level_count() == 0) throw InvariantError("hash grid: needs at least one level");
  if (feature_dim < 1 || feature_dim > 255) throw InvariantError("hash grid: feature_dim must be in [1, 255]");
  if (log2_table_size < 0 || log2_table_size > 24) throw InvariantError("hash grid: log2_table_size must be in [0, 24]");
  auto check_res = [](int lo, int hi, const char* branch) {
    if (lo < 1 || hi < lo || hi > 0xffff)
      throw InvariantError(std::string("hash grid: bad ") + branch + " resolution range");
  };
  check_res(min_res_3d, max_res_3d, "3D");
  check_res(min_res_2d, max_res_2d, "2D");
}

std::vector<int> HashGridConfig::resolutions_3d() const { return geometric(levels_3d, min_res_3d, max_res_3d); }
std::vector<int> HashGridConfig::resolutions_2d() const { return geometric(levels_2d, min_res_2d, max_res_2d); }

HashGrid::HashGrid(HashGridConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  res3_ = cfg_.resolutions_3d();
  res2_ = cfg_.resolutions_2d();
  signs_.assign(cfg_.entry_count(), 1);
}

HashGrid HashGrid::seeded(const HashGridConfig& cfg, std::uint64_t seed) {
  HashGrid g(cfg);
  std::mt19937_64 rng(seed);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < g.signs_.size(); ++i) {
    if ((i & 63) == 0) word = rng();
    g.signs_[i] = (word >> (i & 63)) & 1 ? 1 : -1;
  }
  return g;
}

std::int8_t HashGrid::entry(std::size_t level, std::size_t index, int feature) const {
  return signs_[slot(level, index) + static_cast<std::size_t>(feature)];
}

void HashGrid::set_entry(std::size_t level, std::size_t index, int feature, std::int8_t sign) {
  if (sign != 1 && sign != -1) throw InvariantError("hash grid entries must be -1 or +1");
  signs_[slot(level, index) + static_cast<std::size_t>(feature)] = sign;
}

std::vector<double> HashGrid::query(const Vec3& position) const {
  for (double u : position)
    if (!(u >= 0.0 && u <= 1.0)) throw InvariantError("hash grid query outside the unit cube");

  const int fd = cfg_.feature_dim;
  const std::size_t ts = cfg_.table_size();
  std::vector<double> out(static_cast<std::size_t>(cfg_.output_dim()), 0.0);
  double* dst = out.data();

  for (std::size_t lv = 0; lv < res3_.size(); ++lv, dst += fd) {
    std::array<std::uint32_t, 3> c{};
    std::array<double, 3> t{};
    for (int a = 0; a < 3; ++a) locate(position[a], res3_[lv], c[a], t[a]);
    for (unsigned corner = 0; corner < 8; ++corner) {
      const unsigned dx = corner & 1u, dy = (corner >> 1) & 1u, dz = (corner >> 2) & 1u;
      const double w = (dx ? t[0] : 1.0 - t[0]) * (dy ? t[1] : 1.0 - t[1]) * (dz ? t[2] : 1.0 - t[2]);
      if (w == 0.0) continue;
      const std::int8_t* e = &signs_[slot(lv, spatial_hash(c[0] + dx, c[1] + dy, c[2] + dz, ts))];
      for (int f = 0; f < fd; ++f) dst[f] += w * e[f];
    }
  }

  static constexpr int kPlanes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (std::size_t k = 0; k < res2_.size(); ++k, dst += fd) {
    const std::size_t lv = res3_.size() + k;
    for (std::uint32_t plane = 0; plane < 3; ++plane) {
      std::array<std::uint32_t, 2> c{};
      std::array<double, 2> t{};
      for (int a = 0; a < 2; ++a) locate(position[kPlanes[plane][a]], res2_[k], c[a], t[a]);
      for (unsigned corner = 0; corner < 4; ++corner) {
        const unsigned du = corner & 1u, dv = (corner >> 1) & 1u;
        const double w = (du ? t[0] : 1.0 - t[0]) * (dv ? t[1] : 1.0 - t[1]) / 3.0;
        if (w == 0.0) continue;
        const std::int8_t* e = &signs_[slot(lv, spatial_hash(c[0] + du, c[1] + dv, plane, ts))];
        for (int f = 0; f < fd; ++f) dst[f] += w * e[f];
      }
    }
  }
  return out;
}

std::size_t HashGrid::positive_count() const {
  return static_cast<std::size_t>(std::count(signs_.begin(), signs_.end(), std::int8_t{1}));
}

std::vector<std::uint8_t> HashGrid::serialize() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(cfg_.levels_3d));
  w.u16(static_cast<std::uint16_t>(cfg_.min_res_3d));
  w.u16(static_cast<std::uint16_t>(cfg_.max_res_3d));
  w.u8(static_cast<std::uint8_t>(cfg_.levels_2d));
  w.u16(static_cast<std::uint16_t>(cfg_.min_res_2d));
  w.u16(static_cast<std::uint16_t>(cfg_.max_res_2d));
  w.u8(static_cast<std::uint8_t>(cfg_.feature_dim));
  w.u8(static_cast<std::uint8_t>(cfg_.log2_table_size));
  std::vector<std::uint8_t> packed((signs_.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < signs_.size(); ++i)
    if (signs_[i] > 0) packed[i >> 3] |= static_cast<std::uint8_t>(0x80u >> (i & 7));
  w.bytes(packed);
  return w.take();
}

HashGrid HashGrid::deserialize(std::span<const std::uint8_t> block) {
  ByteReader r(block, "hash grid block");
  HashGridConfig cfg;
  cfg.levels_3d = r.u8();
  cfg.min_res_3d = r.u16();
  cfg.max_res_3d = r.u16();
  cfg.levels_2d = r.u8();
  cfg.min_res_2d = r.u16();
  cfg.max_res_2d = r.u16();
  cfg.feature_dim = r.u8();
  cfg.log2_table_size = r.u8();
  try {
    cfg.validate();
  } catch (const InvariantError& e) {
    throw FormatError(std::string("hash grid block: ") + e.what());
  }
  HashGrid g(cfg);
  auto packed = r.bytes((g.signs_.size() + 7) / 8);
  for (std::size_t i = 0; i < g.signs_.size(); ++i) g.signs_[i] = (packed[i >> 3] >> (7 - (i & 7))) & 1 ? 1 : -1;
  if (!r.at_end()) throw FormatError("hash grid block: trailing bytes");
  return g;
}

std::vector<std::uint8_t> HashGrid::to_file_bytes() const {
  ByteWriter w;
  w.tag("PGH1");
  w.bytes(serialize());
  return w.take();
}

HashGrid HashGrid::from_file_bytes(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "hash grid file");
  r.expect_tag("PGH1");
  return deserialize(bytes.subspan(4));
}

bool operator==(const HashGrid& a, const HashGrid& b) {
  return a.serialize() == b.serialize();
}

double hash_bit_cost(const HashGrid& grid) {
  const double m = static_cast<double>(grid.entries().size());
  const double m_pos = static_cast<double>(grid.positive_count());
  const double m_neg = m - m_pos;
  const double f = std::clamp(m_pos / m, kSignEpsilon, 1.0 - kSignEpsilon);
  return m_pos * -std::log2(f) + m_neg * -std::log2(1.0 - f);
}

std::vector<double> root_parent_context(const HashGridConfig& cfg) {
  return std::vector<double>(static_cast<std::size_t>(cfg.output_dim()), 0.0);
}

}  // namespace pgs
