// Command-line front end: build, adjust, encode, decode, inspect, stream-sim,
// analyze, init-model, dump.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgs/anchor_adjust.hpp"
#include "pgs/bitstream.hpp"
#include "pgs/error.hpp"
#include "pgs/io.hpp"
#include "pgs/objectives.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace pgs;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvariant = 2;
constexpr int kExitFormat = 3;

struct Common {
  std::string config_path;
  bool json = false;

  RunConfig load_config() const {
    if (config_path.empty()) return RunConfig{};
    const auto bytes = read_file(config_path);
    return parse_config(std::string(bytes.begin(), bytes.end()));
  }
};

void emit(const Common& common, const json& report, const std::string& text) {
  if (common.json)
    std::cout << report.dump(2) << '\n';
  else
    std::cout << text;
}

std::string counts_line(const std::vector<std::size_t>& counts) {
  std::string s;
  for (std::size_t l = 0; l < counts.size(); ++l)
    s += "  level " + std::to_string(l + 1) + ": " + std::to_string(counts[l]) + "\n";
  return s;
}

const char* mode_name(PriorMode m) { return m == PriorMode::kMlp ? "mlp" : "fitted"; }

// ---- build ----------------------------------------------------------------

struct BuildArgs {
  std::string points, out;
};

int cmd_build(const Common& common, const BuildArgs& a) {
  const RunConfig rc = common.load_config();
  const PointCloud pc = load_point_cloud(a.points);
  if (pc.points.empty()) throw InvariantError("build: the point cloud is empty");
  OctreeConfig cfg = rc.octree;
  const BoundingCube cube = estimate_bbox(pc, rc.bbox_margin);
  cfg.bbox_min = cube.min;
  cfg.bbox_side = cube.side;
  const OctreeStore store = OctreeStore::build_from_points(cfg, pc);
  write_file(a.out, serialize_scene(store));

  const auto counts = store.counts_per_level();
  json report{{"points", pc.points.size()},
              {"bbox_min", {cfg.bbox_min[0], cfg.bbox_min[1], cfg.bbox_min[2]}},
              {"bbox_side", cfg.bbox_side},
              {"anchors_per_level", counts},
              {"anchors", store.size()}};
  emit(common, report, "anchors per level:\n" + counts_line(counts) + "total: " + std::to_string(store.size()) + "\n");
  return kExitOk;
}

// ---- adjust ---------------------------------------------------------------

struct AdjustArgs {
  std::string scene, stats, out, report;
};

int cmd_adjust(const Common& common, const AdjustArgs& a) {
  const RunConfig rc = common.load_config();
  OctreeStore store = parse_scene(read_file(a.scene));
  const GaussianStats stats = parse_stats(read_file(a.stats), store.config().dim_offsets);
  const AdjustReport rep = adjust_step(store, stats, rc.adjust);
  write_file(a.out, serialize_scene(store));

  json report{{"spawned_per_level", rep.grow.spawned_per_level},
              {"pruned_per_level", rep.prune.pruned_per_level},
              {"anchor_counts_after", rep.anchor_counts_after},
              {"spawned", rep.grow.spawned},
              {"pruned", rep.prune.pruned},
              {"outside_cube", rep.grow.outside_cube}};
  if (!a.report.empty()) write_text(a.report, report.dump(2) + "\n");
  emit(common, report,
       "spawned " + std::to_string(rep.grow.spawned) + ", pruned " + std::to_string(rep.prune.pruned) +
           "\nanchors per level:\n" + counts_line(rep.anchor_counts_after));
  return kExitOk;
}

// ---- encode / decode ------------------------------------------------------

struct EncodeArgs {
  std::string scene, out, mode, grid, weights;
  std::optional<std::uint64_t> seed;
};

int cmd_encode(const Common& common, const EncodeArgs& a) {
  const RunConfig rc = common.load_config();
  const OctreeStore store = parse_scene(read_file(a.scene));
  const std::uint64_t seed = a.seed.value_or(rc.seed);
  PriorMode mode = rc.prior_mode;
  if (a.mode == "mlp") mode = PriorMode::kMlp;
  if (a.mode == "fitted") mode = PriorMode::kFitted;

  CodingModel model = CodingModel::fitted();
  if (mode == PriorMode::kMlp) {
    HashGrid grid = a.grid.empty() ? HashGrid::seeded(rc.hash, seed) : HashGrid::from_file_bytes(read_file(a.grid));
    MlpWeights weights = a.weights.empty() ? MlpWeights::seeded(2 * grid.config().output_dim(), rc.mlp_hidden,
                                                                store.config().channel_count(), seed + 1)
                                           : MlpWeights::from_file_bytes(read_file(a.weights));
    model = CodingModel::mlp(std::move(grid), std::move(weights));
  } else if (!a.grid.empty() || !a.weights.empty()) {
    throw InvariantError("encode: --grid/--weights only apply to --mode mlp");
  }

  const EncodedScene enc = encode_scene(store, model);
  write_file(a.out, enc.bytes);
  json report{{"mode", mode_name(mode)}, {"bytes", enc.bytes.size()}, {"anchors", store.size()}};
  emit(common, report,
       std::string("encoded ") + std::to_string(store.size()) + " anchors (" + mode_name(mode) + ") into " +
           std::to_string(enc.bytes.size()) + " bytes\n");
  return kExitOk;
}

struct DecodeArgs {
  std::string stream, out;
  int lod = 0;
};

int cmd_decode(const Common& common, const DecodeArgs& a) {
  const auto bytes = read_file(a.stream);
  const int k = a.lod > 0 ? a.lod : Header::parse(bytes).config.num_lods;
  const DecodedScene dec = decode_prefix(bytes, k);
  write_file(a.out, serialize_scene(dec.store));
  const auto counts = dec.store.counts_per_level();
  json report{{"levels_decoded", dec.levels_decoded},
              {"bytes_read", dec.bytes_read},
              {"anchors_per_level", counts},
              {"anchors", dec.store.size()}};
  emit(common, report,
       "decoded " + std::to_string(dec.levels_decoded) + " levels from " + std::to_string(dec.bytes_read) +
           " bytes\n" + counts_line(counts));
  return kExitOk;
}

// ---- inspect / stream-sim -------------------------------------------------

json inspect_json(const InspectReport& r) {
  json chunks = json::array();
  for (const auto& c : r.chunks)
    chunks.push_back({{"level", c.level},
                      {"anchors", c.anchors},
                      {"framing_bytes", c.framing_bytes},
                      {"structural_bytes", c.structural_bytes},
                      {"attribute_bytes", c.attribute_bytes},
                      {"total_bytes", c.total()}});
  return {{"mode", mode_name(r.mode)},
          {"header",
           {{"total_bytes", r.header_bytes},
            {"fixed_bytes", r.header_fixed_bytes},
            {"grid_bytes", r.grid_bytes},
            {"weights_bytes", r.weights_bytes},
            {"prior_table_bytes", r.prior_table_bytes}}},
          {"chunks", chunks},
          {"total_bytes", r.total_bytes}};
}

int cmd_inspect(const Common& common, const std::string& stream) {
  const auto bytes = read_file(stream);
  const InspectReport r = inspect(bytes);
  std::string text = std::string("mode ") + mode_name(r.mode) + "\nheader " + std::to_string(r.header_bytes) +
                     " bytes (fixed " + std::to_string(r.header_fixed_bytes) + ", grid " +
                     std::to_string(r.grid_bytes) + ", weights " + std::to_string(r.weights_bytes) + ", priors " +
                     std::to_string(r.prior_table_bytes) + ")\n";
  for (const auto& c : r.chunks)
    text += "level " + std::to_string(c.level) + ": " + std::to_string(c.anchors) + " anchors, " +
            std::to_string(c.total()) + " bytes (framing " + std::to_string(c.framing_bytes) + ", structure " +
            std::to_string(c.structural_bytes) + ", attributes " + std::to_string(c.attribute_bytes) + ")\n";
  text += "total " + std::to_string(r.total_bytes) + " bytes\n";
  emit(common, inspect_json(r), text);
  return kExitOk;
}

bool same_levels(const OctreeStore& a, const OctreeStore& b, int k) {
  for (int l = 1; l <= k; ++l) {
    if (a.count(l) != b.count(l)) return false;
    auto ib = b.level(l).begin();
    for (const auto& [key, anchor] : a.level(l)) {
      if (ib->first != key || ib->second.attrs != anchor.attrs) return false;
      ++ib;
    }
  }
  return true;
}

int cmd_stream_sim(const Common& common, const std::string& stream) {
  const auto bytes = read_file(stream);
  const InspectReport layout = inspect(bytes);
  const int L = static_cast<int>(layout.chunks.size());
  const DecodedScene full = decode_prefix(bytes, L);
  const int rows = full.header.config.dim_offsets;

  json steps = json::array();
  std::string text = "header " + std::to_string(layout.header_bytes) + " bytes\nlod  bytes  anchors  gaussians  structure  attributes  prefix\n";
  std::vector<std::string> violations;
  std::size_t prev_bytes = 0, structural = 0, attribute = 0, framing = 0;
  for (int k = 1; k <= L; ++k) {
    const DecodedScene part = decode_prefix(bytes, k);
    const auto& chunk = layout.chunks[static_cast<std::size_t>(k - 1)];
    structural += chunk.structural_bytes;
    attribute += chunk.attribute_bytes;
    framing += chunk.framing_bytes;
    bool prefix_ok = same_levels(part.store, full.store, k);
    for (int l = k + 1; l <= L; ++l) prefix_ok = prefix_ok && part.store.count(l) == 0;
    if (!prefix_ok) violations.push_back("prefix " + std::to_string(k) + " differs from the full decode");
    if (part.bytes_read <= prev_bytes)
      violations.push_back("cumulative bytes do not increase at lod " + std::to_string(k));
    prev_bytes = part.bytes_read;
    const std::size_t anchors = part.store.size();
    steps.push_back({{"lod", k},
                     {"cumulative_bytes", part.bytes_read},
                     {"anchors", anchors},
                     {"gaussians", anchors * static_cast<std::size_t>(rows)},
                     {"structural_bytes", structural},
                     {"attribute_bytes", attribute},
                     {"framing_bytes", framing},
                     {"prefix_ok", prefix_ok}});
    text += std::to_string(k) + "  " + std::to_string(part.bytes_read) + "  " + std::to_string(anchors) + "  " +
            std::to_string(anchors * static_cast<std::size_t>(rows)) + "  " + std::to_string(structural) + "  " +
            std::to_string(attribute) + "  " + (prefix_ok ? "ok" : "FAIL") + "\n";
  }
  if (prev_bytes != bytes.size())
    violations.push_back("cumulative bytes at the last lod (" + std::to_string(prev_bytes) +
                         ") differ from the file size (" + std::to_string(bytes.size()) + ")");
  json report{{"file_bytes", bytes.size()}, {"header_bytes", layout.header_bytes}, {"steps", steps},
              {"violations", violations}};
  for (const auto& v : violations) text += "violation: " + v + "\n";
  emit(common, report, text);
  return violations.empty() ? kExitOk : kExitInvariant;
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeArgs {
  std::string scene, stats, renders;
  std::optional<std::size_t> nce_samples;
  std::optional<std::uint64_t> seed;
};

// Gaussian scales of an anchor: the absolute values of its last three
// scaling channels, shared by all of its Gaussians.
Vec3 gaussian_scale(const Anchor& a, const OctreeConfig& cfg) {
  Vec3 s{};
  for (int i = 0; i < 3; ++i) {
    const int ch = cfg.dim_feature + (cfg.dim_scaling >= 3 ? cfg.dim_scaling - 3 + i : i % cfg.dim_scaling);
    s[static_cast<std::size_t>(i)] = std::abs(a.attrs[static_cast<std::size_t>(ch)]);
  }
  return s;
}

int cmd_analyze(const Common& common, const AnalyzeArgs& a) {
  const RunConfig rc = common.load_config();
  const OctreeStore store = parse_scene(read_file(a.scene));
  const OctreeConfig& cfg = store.config();
  const int L = cfg.num_lods;
  std::mt19937_64 rng(a.seed.value_or(rc.seed));
  json report;

  const auto anchors = store.lod_slice(L);
  if (!a.stats.empty()) {
    const GaussianStats stats = parse_stats(read_file(a.stats), cfg.dim_offsets);
    if (stats.anchor_count() != anchors.size())
      throw InvariantError("analyze: stats cover " + std::to_string(stats.anchor_count()) + " anchors, scene has " +
                           std::to_string(anchors.size()));
    std::vector<std::size_t> significant(static_cast<std::size_t>(L), 0), very(static_cast<std::size_t>(L), 0);
    double opacity = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const int l = anchors[i]->coord.level;
      for (double g : stats.grads_of(i)) {
        const auto s = classify(g, rc.adjust, l);
        if (s == Significance::kSignificant) ++significant[static_cast<std::size_t>(l - 1)];
        if (s == Significance::kVerySignificant) ++very[static_cast<std::size_t>(l - 1)];
      }
      opacity += stats.opacity[i];
    }
    report["stats"] = {{"significant_per_level", significant},
                       {"very_significant_per_level", very},
                       {"mean_opacity", anchors.empty() ? 0.0 : opacity / static_cast<double>(anchors.size())}};
  }

  // Parent-child pairs for InfoNCE and MI.
  std::vector<std::size_t> children;
  std::vector<std::size_t> parent_index(anchors.size(), 0);
  {
    std::unordered_map<VoxelCoord, std::size_t, VoxelCoordHash> index;
    for (std::size_t i = 0; i < anchors.size(); ++i) index.emplace(anchors[i]->coord, i);
    for (std::size_t i = 0; i < anchors.size(); ++i)
      if (anchors[i]->coord.level >= 2) {
        children.push_back(i);
        parent_index[i] = index.at(parent_coord(anchors[i]->coord));
      }
  }

  double nce = 0.0, nce_inclusive = 0.0;
  std::size_t nce_count = 0;
  if (!children.empty() && anchors.size() >= 3) {
    std::size_t want = a.nce_samples.value_or(
        static_cast<std::size_t>(std::ceil(rc.nce_sample_fraction * static_cast<double>(children.size()))));
    want = std::min(std::max<std::size_t>(want, 1), children.size());
    std::vector<std::size_t> sample = children;
    std::shuffle(sample.begin(), sample.end(), rng);
    sample.resize(want);
    std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
    NceOptions literal{rc.nce_temperature, NceForm::kLiteral, false};
    NceOptions inclusive{rc.nce_temperature, NceForm::kInclusive, false};
    for (std::size_t i : sample) {
      std::vector<std::vector<double>> negs;
      while (negs.size() < static_cast<std::size_t>(rc.nce_negatives)) {
        const std::size_t j = pick(rng);
        if (j != i && j != parent_index[i]) negs.push_back(anchors[j]->attrs);
      }
      nce += info_nce(anchors[i]->attrs, anchors[parent_index[i]]->attrs, negs, literal);
      nce_inclusive += info_nce(anchors[i]->attrs, anchors[parent_index[i]]->attrs, negs, inclusive);
    }
    nce_count = sample.size();
    nce /= static_cast<double>(nce_count);
    nce_inclusive /= static_cast<double>(nce_count);
  }
  report["nce"] = {{"samples", nce_count}, {"literal", nce}, {"inclusive", nce_inclusive},
                   {"temperature", rc.nce_temperature}, {"negatives", rc.nce_negatives}};

  json mi_per_level = json::array();
  double mi_all = 0.0;
  if (!children.empty()) {
    std::vector<std::vector<double>> x, y;
    for (std::size_t i : children) {
      x.push_back(anchors[i]->attrs);
      y.push_back(anchors[parent_index[i]]->attrs);
    }
    mi_all = mi_estimate(x, y, rc.mi_bins);
    for (int l = 2; l <= L; ++l) {
      std::vector<std::vector<double>> xl, yl;
      for (std::size_t i : children)
        if (anchors[i]->coord.level == l) {
          xl.push_back(anchors[i]->attrs);
          yl.push_back(anchors[parent_index[i]]->attrs);
        }
      mi_per_level.push_back({{"level", l}, {"pairs", xl.size()}, {"mi", xl.empty() ? 0.0 : mi_estimate(xl, yl, rc.mi_bins)}});
    }
  }
  report["mi"] = {{"pairs", children.size()}, {"bins", rc.mi_bins}, {"mean", mi_all}, {"per_level", mi_per_level}};

  std::vector<Vec3> scales;
  for (const Anchor* an : anchors) scales.insert(scales.end(), static_cast<std::size_t>(cfg.dim_offsets), gaussian_scale(*an, cfg));
  const double vol = volume_loss(scales);
  report["volume"] = {{"gaussians", scales.size()}, {"loss", vol}};

  // Rate: attribute bits under the fitted prior per coded symbol.
  const EncodedScene enc = encode_scene(store, CodingModel::fitted());
  double attr_bits = 0.0;
  for (const auto& c : inspect(enc.bytes).chunks) attr_bits += 8.0 * static_cast<double>(c.attribute_bytes);
  const double rate = store.size() ? normalized_rate(attr_bits, store.size(), cfg) : 0.0;
  report["rate"] = {{"attribute_bits", attr_bits}, {"bits_per_symbol", rate}, {"stream_bytes", enc.bytes.size()}};

  double c2f = 0.0;
  if (!a.renders.empty()) {
    const fs::path dir(a.renders);
    const Image gt = read_png(dir / "gt.png");
    std::vector<ImagePair> pairs;
    json levels = json::array();
    for (int l = 1; l <= L; ++l) {
      Image r = read_png(dir / ("lod_" + std::to_string(l) + ".png"));
      levels.push_back({{"level", l}, {"l1", l1_loss(r, gt)}, {"ssim", ssim(r, gt)}, {"psnr", psnr(r, gt)}});
      pairs.push_back({std::move(r), gt});
    }
    c2f = c2f_loss(pairs, rc.loss.lambda_ssim);
    for (auto& lv : levels)
      if (std::isinf(lv["psnr"].get<double>())) lv["psnr"] = nullptr;
    report["c2f"] = {{"loss", c2f}, {"lambda_ssim", rc.loss.lambda_ssim}, {"per_level", levels}};
  }

  const LossTerms terms{c2f, vol, nce, rate};
  report["total"] = {{"value", total_loss(terms, rc.loss)},
                     {"lambda_vol", rc.loss.lambda_vol},
                     {"lambda_nce", rc.loss.lambda_nce},
                     {"lambda_e", rc.loss.lambda_e},
                     {"includes_c2f", !a.renders.empty()}};

  std::string text = "anchors " + std::to_string(store.size()) + "\nnce (literal) " + std::to_string(nce) +
                     " over " + std::to_string(nce_count) + " samples\nmi " + std::to_string(mi_all) +
                     " nats over " + std::to_string(children.size()) + " pairs\nvolume " + std::to_string(vol) +
                     "\nrate " + std::to_string(rate) + " bits/symbol\n";
  if (!a.renders.empty()) text += "c2f " + std::to_string(c2f) + "\n";
  text += "total " + std::to_string(total_loss(terms, rc.loss)) + "\n";
  emit(common, report, text);
  return kExitOk;
}

// ---- init-model / dump ----------------------------------------------------

struct InitArgs {
  std::string grid_out, weights_out;
  int channels = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_init_model(const Common& common, const InitArgs& a) {
  const RunConfig rc = common.load_config();
  const std::uint64_t seed = a.seed.value_or(rc.seed);
  const int channels = a.channels > 0 ? a.channels : rc.octree.channel_count();
  const HashGrid grid = HashGrid::seeded(rc.hash, seed);
  const MlpWeights weights = MlpWeights::seeded(2 * rc.hash.output_dim(), rc.mlp_hidden, channels, seed + 1);
  write_file(a.grid_out, grid.to_file_bytes());
  write_file(a.weights_out, weights.to_file_bytes());
  json report{{"grid_entries", rc.hash.entry_count()}, {"context_dim", 2 * rc.hash.output_dim()},
              {"hidden", rc.mlp_hidden}, {"channels", channels}};
  emit(common, report, "wrote " + a.grid_out + " and " + a.weights_out + "\n");
  return kExitOk;
}

int cmd_dump(const std::string& scene) {
  std::cout << parse_scene(read_file(scene)).debug_dump();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive codec for anchor-based 3D Gaussian scenes"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool reporting) {
    sub->add_option("--config", common.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    if (reporting) sub->add_flag("--json", common.json, "print the report as JSON");
  };

  BuildArgs build;
  auto* s_build = app.add_subcommand("build", "build an octree scene from a point cloud");
  s_build->add_option("points", build.points, "PLY or raw point file")->required();
  s_build->add_option("--out,-o", build.out, "scene file to write")->required();
  add_common(s_build, true);

  AdjustArgs adjust;
  auto* s_adjust = app.add_subcommand("adjust", "grow and prune anchors from gradient statistics");
  s_adjust->add_option("--scene", adjust.scene)->required();
  s_adjust->add_option("--stats", adjust.stats)->required();
  s_adjust->add_option("--out,-o", adjust.out, "updated scene file")->required();
  s_adjust->add_option("--report", adjust.report, "also write the JSON report here");
  add_common(s_adjust, true);

  EncodeArgs encode;
  auto* s_encode = app.add_subcommand("encode", "encode a scene into a progressive stream");
  s_encode->add_option("--scene", encode.scene)->required();
  s_encode->add_option("--out,-o", encode.out)->required();
  s_encode->add_option("--mode", encode.mode)->check(CLI::IsMember({"mlp", "fitted"}));
  s_encode->add_option("--grid", encode.grid, "hash grid file (mlp mode)");
  s_encode->add_option("--weights", encode.weights, "MLP weights file (mlp mode)");
  s_encode->add_option("--seed", encode.seed);
  add_common(s_encode, true);

  DecodeArgs decode;
  auto* s_decode = app.add_subcommand("decode", "decode a stream prefix into a scene file");
  s_decode->add_option("stream", decode.stream)->required();
  s_decode->add_option("--lod", decode.lod, "number of levels to decode (default all)")->check(CLI::PositiveNumber);
  s_decode->add_option("--out,-o", decode.out)->required();
  add_common(s_decode, true);

  std::string inspect_stream;
  auto* s_inspect = app.add_subcommand("inspect", "byte accounting of a stream");
  s_inspect->add_option("stream", inspect_stream)->required();
  add_common(s_inspect, true);

  std::string sim_stream;
  auto* s_sim = app.add_subcommand("stream-sim", "decode every prefix and check the progressive property");
  s_sim->add_option("stream", sim_stream)->required();
  add_common(s_sim, true);

  AnalyzeArgs analyze;
  auto* s_analyze = app.add_subcommand("analyze", "evaluate losses and parent-child statistics");
  s_analyze->add_option("--scene", analyze.scene)->required();
  s_analyze->add_option("--stats", analyze.stats);
  s_analyze->add_option("--renders", analyze.renders, "directory with lod_<l>.png and gt.png")
      ->check(CLI::ExistingDirectory);
  s_analyze->add_option("--nce-samples", analyze.nce_samples);
  s_analyze->add_option("--seed", analyze.seed);
  add_common(s_analyze, true);

  InitArgs init;
  auto* s_init = app.add_subcommand("init-model", "write a seeded hash grid and MLP weights");
  s_init->add_option("--grid-out", init.grid_out)->required();
  s_init->add_option("--weights-out", init.weights_out)->required();
  s_init->add_option("--channels", init.channels, "output channels (default from config)");
  s_init->add_option("--seed", init.seed);
  add_common(s_init, true);

  std::string dump_scene;
  auto* s_dump = app.add_subcommand("dump", "print 'level ix iy iz' per anchor");
  s_dump->add_option("scene", dump_scene)->required();
  add_common(s_dump, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (s_build->parsed()) return cmd_build(common, build);
    if (s_adjust->parsed()) return cmd_adjust(common, adjust);
    if (s_encode->parsed()) return cmd_encode(common, encode);
    if (s_decode->parsed()) return cmd_decode(common, decode);
    if (s_inspect->parsed()) return cmd_inspect(common, inspect_stream);
    if (s_sim->parsed()) return cmd_stream_sim(common, sim_stream);
    if (s_analyze->parsed()) return cmd_analyze(common, analyze);
    if (s_init->parsed()) return cmd_init_model(common, init);
    if (s_dump->parsed()) return cmd_dump(dump_scene);
  } catch (const InvariantError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  }
  return kExitUsage;
}
