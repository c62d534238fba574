#include "pgs/bitstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pgs/byte_io.hpp"
#include "pgs/error.hpp"
#include "pgs/parallel.hpp"

namespace pgs {

namespace {

constexpr std::size_t kHeaderFixedBytes = 4 + 1 + 2 + 4 * 8 + 3 * 2 + 3 * 4 + 1;
constexpr std::size_t kChunkFraming = 1 + 4 + 4;

// Float32 storage of a value that must stay >= its original (sigma floors).
float to_f32_not_below(double v) {
  float f = static_cast<float>(v);
  if (static_cast<double>(f) < v) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return f;
}

std::vector<VoxelCoord> coords_of(const OctreeStore::Level& level) {
  std::vector<VoxelCoord> out;
  out.reserve(level.size());
  for (const auto& [key, a] : level) out.push_back(a.coord);
  return out;
}

// Per-anchor coding parameters, derived identically on both sides.
class ContextModel {
 public:
  explicit ContextModel(const Header& h) : header_(h) {
    const auto& cfg = h.config;
    if (h.mode == PriorMode::kMlp) {
      if (!h.grid || !h.weights) throw InvariantError("mlp prior mode needs a hash grid and MLP weights");
      h.weights->check_shape(2 * h.grid->config().output_dim(), cfg.channel_count());
    } else {
      if (h.level_priors.size() != static_cast<std::size_t>(cfg.num_lods))
        throw InvariantError("fitted prior mode needs one prior table per level");
      for (const auto& prior : h.level_priors) {
        const auto params = pgs::static_params(prior, cfg);
        std::vector<GaussianSymbolCoder> coders;
        for (std::size_t c = 0; c < params.channels(); ++c) coders.emplace_back(params.mu[c], params.sigma[c], params.q[c]);
        level_params_.push_back(params);
        level_coders_.push_back(std::move(coders));
      }
    }
  }

  bool is_static() const { return header_.mode == PriorMode::kFitted; }

  EntropyParams params_for(const VoxelCoord& c) const {
    const auto& cfg = header_.config;
    if (is_static()) return static_params(c.level);
    const auto h = header_.grid->query(normalized_position(cfg, c));
    const auto hp = c.level == 1 ? root_parent_context(header_.grid->config())
                                 : header_.grid->query(normalized_position(cfg, parent_coord(c)));
    return predict_params(*header_.weights, h, hp, cfg);
  }

  const EntropyParams& static_params(int level) const { return level_params_[static_cast<std::size_t>(level - 1)]; }

  const std::vector<GaussianSymbolCoder>& static_coders(int level) const {
    return level_coders_[static_cast<std::size_t>(level - 1)];
  }

 private:
  Header header_;
  std::vector<EntropyParams> level_params_;
  std::vector<std::vector<GaussianSymbolCoder>> level_coders_;
};

struct ChunkOutput {
  std::vector<std::uint8_t> bytes;
};

}  // namespace

std::vector<std::uint8_t> Header::serialize() const {
  config.validate();
  ByteWriter w;
  w.tag("PGS1");
  w.u8(kStreamVersion);
  w.u8(static_cast<std::uint8_t>(config.base_depth));
  w.u8(static_cast<std::uint8_t>(config.num_lods));
  for (double v : config.bbox_min) w.f64(v);
  w.f64(config.bbox_side);
  w.u16(static_cast<std::uint16_t>(config.dim_feature));
  w.u16(static_cast<std::uint16_t>(config.dim_scaling));
  w.u16(static_cast<std::uint16_t>(config.dim_offsets));
  w.f32(static_cast<float>(config.q0_feature));
  w.f32(static_cast<float>(config.q0_scaling));
  w.f32(static_cast<float>(config.q0_offset));
  w.u8(static_cast<std::uint8_t>(mode));
  if (mode == PriorMode::kMlp) {
    if (!grid || !weights) throw InvariantError("header: mlp mode needs a grid and weights");
    const auto g = grid->serialize();
    w.u32(static_cast<std::uint32_t>(g.size()));
    w.bytes(g);
    const auto m = weights->serialize();
    w.u32(static_cast<std::uint32_t>(m.size()));
    w.bytes(m);
  } else {
    if (level_priors.size() != static_cast<std::size_t>(config.num_lods))
      throw InvariantError("header: fitted mode needs one prior table per level");
    for (const auto& level : level_priors) {
      if (level.size() != static_cast<std::size_t>(config.channel_count()))
        throw InvariantError("header: prior table width does not match the channel count");
      for (const auto& p : level) {
        w.f32(static_cast<float>(p.mu));
        w.f32(to_f32_not_below(p.sigma));
      }
    }
  }
  return w.take();
}

Header Header::parse(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  ByteReader r(bytes, "stream header");
  r.expect_tag("PGS1");
  const std::uint8_t version = r.u8();
  if (version != kStreamVersion) throw FormatError("stream header: unsupported version " + std::to_string(version));
  Header h;
  auto& cfg = h.config;
  cfg.base_depth = r.u8();
  cfg.num_lods = r.u8();
  for (double& v : cfg.bbox_min) v = r.f64();
  cfg.bbox_side = r.f64();
  cfg.dim_feature = r.u16();
  cfg.dim_scaling = r.u16();
  cfg.dim_offsets = r.u16();
  cfg.q0_feature = r.f32();
  cfg.q0_scaling = r.f32();
  cfg.q0_offset = r.f32();
  try {
    cfg.validate();
  } catch (const InvariantError& e) {
    throw FormatError(std::string("stream header: ") + e.what());
  }
  const std::uint8_t mode = r.u8();
  if (mode == static_cast<std::uint8_t>(PriorMode::kMlp)) {
    h.mode = PriorMode::kMlp;
    const std::uint32_t glen = r.u32();
    h.grid = HashGrid::deserialize(r.bytes(glen));
    const std::uint32_t wlen = r.u32();
    h.weights = MlpWeights::deserialize(r.bytes(wlen));
  } else if (mode == static_cast<std::uint8_t>(PriorMode::kFitted)) {
    h.mode = PriorMode::kFitted;
    h.level_priors.resize(static_cast<std::size_t>(cfg.num_lods));
    for (auto& level : h.level_priors) {
      level.resize(static_cast<std::size_t>(cfg.channel_count()));
      for (auto& p : level) {
        p.mu = r.f32();
        p.sigma = r.f32();
        if (!std::isfinite(p.mu) || !(p.sigma > 0.0) || !std::isfinite(p.sigma))
          throw FormatError("stream header: invalid fitted prior entry");
      }
    }
  } else {
    throw FormatError("stream header: unknown prior mode " + std::to_string(mode));
  }
  if (consumed) *consumed = r.position();
  return h;
}

std::size_t structural_block_size(int level, std::size_t count) {
  if (level == 1) return count * 12;
  return (count * (kParentIndexBits + kOctantBits) + 7) / 8;
}

std::vector<std::uint8_t> encode_structural(std::span<const VoxelCoord> anchors,
                                            std::span<const VoxelCoord> previous_level, int level) {
  if (level < 2) throw InvariantError("encode_structural: level-1 anchors are stored verbatim");
  std::vector<std::uint64_t> keys;
  keys.reserve(previous_level.size());
  for (const auto& c : previous_level) keys.push_back(morton_key(c));

  BitWriter bits;
  for (const auto& c : anchors) {
    if (c.level != level) throw InvariantError("encode_structural: anchor level differs from the chunk level");
    const std::uint64_t pk = morton_key(parent_coord(c));
    auto it = std::lower_bound(keys.begin(), keys.end(), pk);
    if (it == keys.end() || *it != pk)
      throw InvariantError("encode_structural: level " + std::to_string(level) + " anchor has no parent");
    const auto index = static_cast<std::uint64_t>(it - keys.begin());
    if (index > kMaxParentIndex)
      throw InvariantError("encode_structural: parent index " + std::to_string(index) + " at level " +
                           std::to_string(level) + " exceeds the 20-bit address range");
    bits.put(static_cast<std::uint32_t>(index), kParentIndexBits);
    bits.put(octant_code(c), kOctantBits);
  }
  return bits.take();
}

std::vector<VoxelCoord> decode_structural(std::span<const std::uint8_t> block, std::size_t count,
                                          std::span<const VoxelCoord> previous_level) {
  BitReader bits(block);
  std::vector<VoxelCoord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t index = bits.get(kParentIndexBits);
    const std::uint32_t octant = bits.get(kOctantBits);
    if (index >= previous_level.size()) throw FormatError("structural block: parent index out of range");
    out.push_back(child_coord(previous_level[index], octant));
  }
  return out;
}

std::vector<std::uint8_t> encode_level1_coords(std::span<const VoxelCoord> roots) {
  ByteWriter w;
  for (const auto& c : roots) {
    if (c.level != 1) throw InvariantError("encode_level1_coords: anchor is not a root");
    w.u32(c.x);
    w.u32(c.y);
    w.u32(c.z);
  }
  return w.take();
}

std::vector<VoxelCoord> decode_level1_coords(std::span<const std::uint8_t> block, std::size_t count) {
  ByteReader r(block, "level-1 coordinates");
  std::vector<VoxelCoord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    VoxelCoord c;
    c.x = r.u32();
    c.y = r.u32();
    c.z = r.u32();
    c.level = 1;
    out.push_back(c);
  }
  return out;
}

EncodedScene encode_scene(const OctreeStore& store, const CodingModel& model) {
  if (auto violation = store.validate()) throw InvariantError("encode_scene: invalid store: " + *violation);

  Header header;
  header.config = store.config();
  header.mode = model.mode;
  const int L = header.config.num_lods;
  const int channels = header.config.channel_count();
  if (model.mode == PriorMode::kMlp) {
    header.grid = model.grid;
    header.weights = model.weights;
  } else {
    for (int l = 1; l <= L; ++l) {
      std::vector<const std::vector<double>*> attrs;
      for (const auto& [key, a] : store.level(l)) attrs.push_back(&a.attrs);
      auto prior = fit_static_prior(attrs, channels);
      for (auto& p : prior) {
        p.mu = static_cast<float>(p.mu);
        p.sigma = to_f32_not_below(p.sigma);
      }
      header.level_priors.push_back(std::move(prior));
    }
  }

  EncodedScene result{header.serialize(), store};
  // Code with exactly what the decoder reads back (Q0 and priors are stored as f32).
  const ContextModel context(Header::parse(result.bytes));

  std::vector<ChunkOutput> chunks(static_cast<std::size_t>(L));
  parallel_for(static_cast<std::size_t>(L), [&](std::size_t li) {
    const int l = static_cast<int>(li) + 1;
    const auto& level = store.level(l);
    const auto coords = coords_of(level);

    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(l));
    w.u32(static_cast<std::uint32_t>(coords.size()));
    w.bytes(l == 1 ? encode_level1_coords(coords) : encode_structural(coords, coords_of(store.level(l - 1)), l));

    RangeEncoder enc;
    auto& recon_level = result.reconstruction.level(l);
    for (const auto& [key, anchor] : level) {
      const EntropyParams params = context.is_static() ? context.static_params(l) : context.params_for(anchor.coord);
      const QuantizedAttributes qa = quantize(anchor.attrs, params);
      for (std::size_t c = 0; c < qa.symbols.size(); ++c) {
        if (context.is_static())
          context.static_coders(l)[c].encode(enc, qa.symbols[c]);
        else
          GaussianSymbolCoder(params.mu[c], params.sigma[c], params.q[c]).encode(enc, qa.symbols[c]);
      }
      recon_level.at(key).attrs = qa.values;
    }
    const auto payload = enc.finish();
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.bytes(payload);
    chunks[li].bytes = w.take();
  });

  for (const auto& c : chunks) result.bytes.insert(result.bytes.end(), c.bytes.begin(), c.bytes.end());
  return result;
}

DecodedScene decode_prefix(std::span<const std::uint8_t> bytes, int k) {
  std::size_t header_len = 0;
  Header header = Header::parse(bytes, &header_len);
  const auto& cfg = header.config;
  if (k < 1 || k > cfg.num_lods)
    throw InvariantError("decode_prefix: target LoD " + std::to_string(k) + " outside [1, " +
                         std::to_string(cfg.num_lods) + "]");

  DecodedScene out{std::move(header), OctreeStore(cfg), 0, header_len};
  const ContextModel context(out.header);
  const std::size_t channels = static_cast<std::size_t>(cfg.channel_count());

  ByteReader r(bytes.subspan(header_len), "stream chunk");
  for (int l = 1; l <= k; ++l) {
    const std::uint8_t level = r.u8();
    if (level != l) throw FormatError("stream chunk: expected level " + std::to_string(l) + ", found " + std::to_string(level));
    const std::uint32_t count = r.u32();
    const auto block = r.bytes(structural_block_size(l, count));
    std::vector<VoxelCoord> coords;
    if (l == 1) {
      coords = decode_level1_coords(block, count);
    } else {
      coords = decode_structural(block, count, coords_of(out.store.level(l - 1)));
    }
    for (std::size_t i = 1; i < coords.size(); ++i)
      if (morton_key(coords[i]) <= morton_key(coords[i - 1]))
        throw FormatError("stream chunk: level " + std::to_string(l) + " anchors are not in canonical order");

    const std::uint32_t payload_len = r.u32();
    const auto payload = r.bytes(payload_len);

    // Parameters depend on positions only, so they are computed up front.
    std::vector<EntropyParams> params;
    if (!context.is_static()) {
      params.resize(coords.size());
      parallel_for(coords.size(), [&](std::size_t i) {
        if (!out.store.in_bounds(coords[i])) return;  // reported by insert below
        params[i] = context.params_for(coords[i]);
      });
    }

    RangeDecoder dec(payload);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      std::vector<double> attrs(channels);
      if (context.is_static()) {
        const auto& coders = context.static_coders(l);
        const auto& q = context.static_params(l).q;
        for (std::size_t c = 0; c < channels; ++c) attrs[c] = coders[c].decode(dec) * q[c];
      } else {
        const auto& p = params[i];
        for (std::size_t c = 0; c < channels; ++c)
          attrs[c] = GaussianSymbolCoder(p.mu[c], p.sigma[c], p.q[c]).decode(dec) * p.q[c];
      }
      if (!out.store.insert(coords[i], std::move(attrs)))
        throw FormatError("stream chunk: duplicate anchor at level " + std::to_string(l));
    }
    if (dec.consumed() != payload.size())
      throw FormatError("stream chunk: level " + std::to_string(l) + " payload length does not match its content");
    out.levels_decoded = l;
  }
  out.bytes_read = header_len + r.position();
  if (auto violation = out.store.validate()) throw InvariantError("decode_prefix: " + *violation);
  return out;
}

InspectReport inspect(std::span<const std::uint8_t> bytes) {
  InspectReport rep;
  const Header header = Header::parse(bytes, &rep.header_bytes);
  rep.mode = header.mode;
  rep.header_fixed_bytes = kHeaderFixedBytes;
  if (header.mode == PriorMode::kMlp) {
    rep.grid_bytes = 4 + header.grid->serialize().size();
    rep.weights_bytes = 4 + header.weights->serialize().size();
  } else {
    rep.prior_table_bytes = static_cast<std::size_t>(header.config.num_lods) *
                            static_cast<std::size_t>(header.config.channel_count()) * 8;
  }
  ByteReader r(bytes.subspan(rep.header_bytes), "stream chunk");
  while (!r.at_end()) {
    ChunkReport c;
    c.level = r.u8();
    c.anchors = r.u32();
    c.structural_bytes = structural_block_size(c.level, c.anchors);
    r.bytes(c.structural_bytes);
    c.attribute_bytes = r.u32();
    r.bytes(c.attribute_bytes);
    c.framing_bytes = kChunkFraming;
    rep.chunks.push_back(c);
  }
  rep.total_bytes = rep.header_bytes;
  for (const auto& c : rep.chunks) rep.total_bytes += c.total();
  return rep;
}

}  // namespace pgs
