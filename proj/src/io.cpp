#include "pgs/io.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pgs/byte_io.hpp"
#include "pgs/error.hpp"

namespace pgs {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw FormatError("read failed: " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------------------
// PLY

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

std::size_t ply_type_size(const std::string& t) {
  static const std::map<std::string, std::size_t> sizes = {
      {"char", 1},   {"uchar", 1},  {"int8", 1},   {"uint8", 1},   {"short", 2},   {"ushort", 2},
      {"int16", 2},  {"uint16", 2}, {"int", 4},    {"uint", 4},    {"int32", 4},   {"uint32", 4},
      {"float", 4},  {"float32", 4}, {"double", 8}, {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) throw FormatError("ply: unknown property type '" + t + "'");
  return it->second;
}

double ply_read_binary(const std::string& t, const std::uint8_t* p) {
  auto load = [p]<class T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return load(std::int8_t{});
  if (t == "uchar" || t == "uint8") return load(std::uint8_t{});
  if (t == "short" || t == "int16") return load(std::int16_t{});
  if (t == "ushort" || t == "uint16") return load(std::uint16_t{});
  if (t == "int" || t == "int32") return load(std::int32_t{});
  if (t == "uint" || t == "uint32") return load(std::uint32_t{});
  if (t == "float" || t == "float32") return load(float{});
  return load(double{});
}

}  // namespace

PointCloud parse_ply(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    if (pos >= bytes.size()) throw FormatError("ply: header ends prematurely");
    std::size_t end = pos;
    while (end < bytes.size() && bytes[end] != '\n') ++end;
    std::string line(reinterpret_cast<const char*>(bytes.data()) + pos, end - pos);
    pos = std::min(end + 1, bytes.size());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") throw FormatError("ply: missing magic");
  std::string format;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      ls >> format;
    } else if (word == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      if (!ls) throw FormatError("ply: bad element line");
      elements.push_back(std::move(e));
    } else if (word == "property") {
      if (elements.empty()) throw FormatError("ply: property before any element");
      PlyProperty p;
      ls >> p.type;
      if (p.type == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type;
      }
      ls >> p.name;
      if (!ls) throw FormatError("ply: bad property line");
      elements.back().props.push_back(std::move(p));
    } else {
      throw FormatError("ply: unexpected header line '" + line + "'");
    }
  }
  if (format != "ascii" && format != "binary_little_endian")
    throw FormatError("ply: unsupported format '" + format + "'");

  PointCloud pc;
  if (format == "ascii") {
    std::string body(reinterpret_cast<const char*>(bytes.data()) + pos, bytes.size() - pos);
    std::istringstream in(body);
    for (const auto& e : elements) {
      int ix = -1, iy = -1, iz = -1;
      for (std::size_t i = 0; i < e.props.size(); ++i) {
        if (e.props[i].name == "x") ix = static_cast<int>(i);
        if (e.props[i].name == "y") iy = static_cast<int>(i);
        if (e.props[i].name == "z") iz = static_cast<int>(i);
      }
      for (std::size_t n = 0; n < e.count; ++n) {
        Vec3 p{};
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          std::size_t items = 1;
          if (e.props[i].is_list) {
            double c;
            if (!(in >> c)) throw FormatError("ply: truncated ascii body");
            items = static_cast<std::size_t>(c);
          }
          for (std::size_t k = 0; k < items; ++k) {
            double v;
            if (!(in >> v)) throw FormatError("ply: truncated ascii body");
            if (e.name == "vertex") {
              if (static_cast<int>(i) == ix) p[0] = v;
              if (static_cast<int>(i) == iy) p[1] = v;
              if (static_cast<int>(i) == iz) p[2] = v;
            }
          }
        }
        if (e.name == "vertex") pc.points.push_back(p);
      }
      if (e.name == "vertex" && (ix < 0 || iy < 0 || iz < 0)) throw FormatError("ply: vertex lacks x/y/z");
    }
  } else {
    for (const auto& e : elements) {
      int ix = -1, iy = -1, iz = -1;
      for (std::size_t i = 0; i < e.props.size(); ++i) {
        if (e.props[i].name == "x") ix = static_cast<int>(i);
        if (e.props[i].name == "y") iy = static_cast<int>(i);
        if (e.props[i].name == "z") iz = static_cast<int>(i);
      }
      if (e.name == "vertex" && (ix < 0 || iy < 0 || iz < 0)) throw FormatError("ply: vertex lacks x/y/z");
      for (std::size_t n = 0; n < e.count; ++n) {
        Vec3 p{};
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          const auto& prop = e.props[i];
          std::size_t items = 1;
          if (prop.is_list) {
            const std::size_t cs = ply_type_size(prop.count_type);
            if (bytes.size() - pos < cs) throw FormatError("ply: truncated binary body");
            items = static_cast<std::size_t>(ply_read_binary(prop.count_type, bytes.data() + pos));
            pos += cs;
          }
          const std::size_t sz = ply_type_size(prop.type);
          if ((bytes.size() - pos) / sz < items) throw FormatError("ply: truncated binary body");
          if (!prop.is_list && e.name == "vertex") {
            const double v = ply_read_binary(prop.type, bytes.data() + pos);
            if (static_cast<int>(i) == ix) p[0] = v;
            if (static_cast<int>(i) == iy) p[1] = v;
            if (static_cast<int>(i) == iz) p[2] = v;
          }
          pos += sz * items;
        }
        if (e.name == "vertex") pc.points.push_back(p);
      }
    }
  }
  return pc;
}

PointCloud parse_raw_points(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "raw point file");
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 12) throw FormatError("raw point file: count exceeds the file size");
  PointCloud pc;
  pc.points.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double x = r.f32(), y = r.f32(), z = r.f32();
    pc.points.push_back({x, y, z});
  }
  if (!r.at_end()) throw FormatError("raw point file: trailing bytes");
  return pc;
}

std::vector<std::uint8_t> serialize_raw_points(const PointCloud& pc) {
  ByteWriter w;
  w.u64(pc.points.size());
  for (const auto& p : pc.points)
    for (double v : p) w.f32(static_cast<float>(v));
  return w.take();
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const bool ply_magic = bytes.size() >= 3 && std::memcmp(bytes.data(), "ply", 3) == 0;
  if (path.extension() == ".ply" || ply_magic) return parse_ply(bytes);
  return parse_raw_points(bytes);
}

// ---------------------------------------------------------------------------
// Stats and scenes

GaussianStats parse_stats(std::span<const std::uint8_t> bytes, int rows) {
  ByteReader r(bytes, "stats file");
  const std::uint64_t n = r.u64();
  const std::uint64_t per = static_cast<std::uint64_t>(rows + 1) * 4;
  if (n > r.remaining() / per || r.remaining() != n * per)
    throw FormatError("stats file: size does not match " + std::to_string(n) + " anchors of " +
                      std::to_string(rows) + " rows");
  GaussianStats s;
  s.rows_per_anchor = rows;
  s.grad_mags.reserve(n * static_cast<std::uint64_t>(rows));
  s.opacity.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int j = 0; j < rows; ++j) {
      const double g = r.f32();
      if (!(g >= 0.0) || !std::isfinite(g)) throw FormatError("stats file: gradient magnitudes must be finite and >= 0");
      s.grad_mags.push_back(g);
    }
    const double op = r.f32();
    if (!(op >= 0.0) || !std::isfinite(op)) throw FormatError("stats file: opacity must be finite and >= 0");
    s.opacity.push_back(op);
  }
  return s;
}

std::vector<std::uint8_t> serialize_stats(const GaussianStats& stats) {
  ByteWriter w;
  w.u64(stats.anchor_count());
  for (std::size_t i = 0; i < stats.anchor_count(); ++i) {
    for (double g : stats.grads_of(i)) w.f32(static_cast<float>(g));
    w.f32(static_cast<float>(stats.opacity[i]));
  }
  return w.take();
}

std::vector<std::uint8_t> serialize_scene(const OctreeStore& store) {
  const auto& cfg = store.config();
  ByteWriter w;
  w.tag("PGSC");
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(cfg.base_depth));
  w.u8(static_cast<std::uint8_t>(cfg.num_lods));
  for (double v : cfg.bbox_min) w.f64(v);
  w.f64(cfg.bbox_side);
  w.u16(static_cast<std::uint16_t>(cfg.dim_feature));
  w.u16(static_cast<std::uint16_t>(cfg.dim_scaling));
  w.u16(static_cast<std::uint16_t>(cfg.dim_offsets));
  w.f32(static_cast<float>(cfg.q0_feature));
  w.f32(static_cast<float>(cfg.q0_scaling));
  w.f32(static_cast<float>(cfg.q0_offset));
  w.u64(store.size());
  for (const Anchor* a : store.lod_slice(cfg.num_lods)) {
    w.u8(static_cast<std::uint8_t>(a->coord.level));
    w.u32(a->coord.x);
    w.u32(a->coord.y);
    w.u32(a->coord.z);
    for (double v : a->attrs) w.f32(static_cast<float>(v));
  }
  return w.take();
}

OctreeStore parse_scene(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "scene file");
  r.expect_tag("PGSC");
  if (r.u8() != 1) throw FormatError("scene file: unsupported version");
  OctreeConfig cfg;
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
    throw FormatError(std::string("scene file: ") + e.what());
  }
  OctreeStore store(cfg);
  const std::uint64_t n = r.u64();
  const auto channels = static_cast<std::size_t>(cfg.channel_count());
  if (n > r.remaining() / (13 + 4 * channels)) throw FormatError("scene file: anchor count exceeds the file size");
  for (std::uint64_t i = 0; i < n; ++i) {
    VoxelCoord c;
    c.level = r.u8();
    c.x = r.u32();
    c.y = r.u32();
    c.z = r.u32();
    std::vector<double> attrs(channels);
    for (auto& v : attrs) v = r.f32();
    // Canonical order puts parents first, so insert() can check them.
    if (!store.insert(c, std::move(attrs))) throw FormatError("scene file: duplicate anchor");
  }
  if (!r.at_end()) throw FormatError("scene file: trailing bytes");
  return store;
}

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
  octree.validate();
  adjust.validate();
  loss.validate();
  hash.validate();
  if (bbox_margin < 0.0) throw InvariantError("bbox_margin must be >= 0");
  if (mlp_hidden < 1) throw InvariantError("mlp_hidden must be >= 1");
  if (!(nce_temperature > 0.0)) throw InvariantError("nce_temperature must be positive");
  if (nce_negatives < 1) throw InvariantError("nce_negatives must be >= 1");
  if (!(nce_sample_fraction > 0.0 && nce_sample_fraction <= 1.0))
    throw InvariantError("nce_sample_fraction must be in (0, 1]");
  if (mi_bins < 1) throw InvariantError("mi_bins must be >= 1");
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for doubles is available in GCC 11.
    res = std::from_chars(first, last, out);
  } else {
    res = std::from_chars(first, last, out);
  }
  if (res.ec != std::errc{} || res.ptr != last)
    throw InvariantError("config: bad value '" + value + "' for key '" + key + "'");
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto dbl = [](double& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = parse_number<double>(k, v); }; };
  auto integer = [](int& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = parse_number<int>(k, v); }; };

  const std::map<std::string, Setter> setters = {
      {"base_depth", integer(cfg.octree.base_depth)},
      {"num_lods", integer(cfg.octree.num_lods)},
      {"dim_feature", integer(cfg.octree.dim_feature)},
      {"dim_scaling", integer(cfg.octree.dim_scaling)},
      {"dim_offsets", integer(cfg.octree.dim_offsets)},
      {"q0_feature", dbl(cfg.octree.q0_feature)},
      {"q0_scaling", dbl(cfg.octree.q0_scaling)},
      {"q0_offset", dbl(cfg.octree.q0_offset)},
      {"bbox_margin", dbl(cfg.bbox_margin)},
      {"tau_g", dbl(cfg.adjust.tau_g)},
      {"beta", dbl(cfg.adjust.beta)},
      {"tau_o", dbl(cfg.adjust.tau_o)},
      {"period", integer(cfg.adjust.period)},
      {"lambda_ssim", dbl(cfg.loss.lambda_ssim)},
      {"lambda_vol", dbl(cfg.loss.lambda_vol)},
      {"lambda_nce", dbl(cfg.loss.lambda_nce)},
      {"lambda_e", dbl(cfg.loss.lambda_e)},
      {"hash_levels_3d", integer(cfg.hash.levels_3d)},
      {"hash_min_res_3d", integer(cfg.hash.min_res_3d)},
      {"hash_max_res_3d", integer(cfg.hash.max_res_3d)},
      {"hash_levels_2d", integer(cfg.hash.levels_2d)},
      {"hash_min_res_2d", integer(cfg.hash.min_res_2d)},
      {"hash_max_res_2d", integer(cfg.hash.max_res_2d)},
      {"hash_feature_dim", integer(cfg.hash.feature_dim)},
      {"hash_log2_table_size", integer(cfg.hash.log2_table_size)},
      {"mlp_hidden", integer(cfg.mlp_hidden)},
      {"nce_temperature", dbl(cfg.nce_temperature)},
      {"nce_negatives", integer(cfg.nce_negatives)},
      {"nce_sample_fraction", dbl(cfg.nce_sample_fraction)},
      {"mi_bins", integer(cfg.mi_bins)},
      {"seed", [&cfg](const std::string& k, const std::string& v) { cfg.seed = parse_number<std::uint64_t>(k, v); }},
      {"prior_mode",
       [&cfg](const std::string&, const std::string& v) {
         if (v == "fitted")
           cfg.prior_mode = PriorMode::kFitted;
         else if (v == "mlp")
           cfg.prior_mode = PriorMode::kMlp;
         else
           throw InvariantError("config: prior_mode must be 'fitted' or 'mlp'");
       }},
  };

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    ++line_no;
    std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    if (const auto hash = line.find('#'); hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvariantError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw InvariantError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(key, value);
  }
  cfg.validate();
  return cfg;
}

std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "base_depth = " << c.octree.base_depth << '\n'
     << "num_lods = " << c.octree.num_lods << '\n'
     << "dim_feature = " << c.octree.dim_feature << '\n'
     << "dim_scaling = " << c.octree.dim_scaling << '\n'
     << "dim_offsets = " << c.octree.dim_offsets << '\n'
     << "q0_feature = " << c.octree.q0_feature << '\n'
     << "q0_scaling = " << c.octree.q0_scaling << '\n'
     << "q0_offset = " << c.octree.q0_offset << '\n'
     << "bbox_margin = " << c.bbox_margin << '\n'
     << "tau_g = " << c.adjust.tau_g << '\n'
     << "beta = " << c.adjust.beta << '\n'
     << "tau_o = " << c.adjust.tau_o << '\n'
     << "period = " << c.adjust.period << '\n'
     << "lambda_ssim = " << c.loss.lambda_ssim << '\n'
     << "lambda_vol = " << c.loss.lambda_vol << '\n'
     << "lambda_nce = " << c.loss.lambda_nce << '\n'
     << "lambda_e = " << c.loss.lambda_e << '\n'
     << "hash_levels_3d = " << c.hash.levels_3d << '\n'
     << "hash_min_res_3d = " << c.hash.min_res_3d << '\n'
     << "hash_max_res_3d = " << c.hash.max_res_3d << '\n'
     << "hash_levels_2d = " << c.hash.levels_2d << '\n'
     << "hash_min_res_2d = " << c.hash.min_res_2d << '\n'
     << "hash_max_res_2d = " << c.hash.max_res_2d << '\n'
     << "hash_feature_dim = " << c.hash.feature_dim << '\n'
     << "hash_log2_table_size = " << c.hash.log2_table_size << '\n'
     << "prior_mode = " << (c.prior_mode == PriorMode::kMlp ? "mlp" : "fitted") << '\n'
     << "mlp_hidden = " << c.mlp_hidden << '\n'
     << "nce_temperature = " << c.nce_temperature << '\n'
     << "nce_negatives = " << c.nce_negatives << '\n'
     << "nce_sample_fraction = " << c.nce_sample_fraction << '\n'
     << "mi_bins = " << c.mi_bins << '\n'
     << "seed = " << c.seed << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// PNG

Image read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw FormatError("png: cannot read " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError("png: decode failed for " + path.string() + ": " + image.message);
  }
  Image img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i] / 255.0;
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(img.pixels.size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw FormatError("png: cannot write " + path.string() + ": " + image.message);
}

}  // namespace pgs
