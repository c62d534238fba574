#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pgs/bitstream.hpp"
#include "pgs/io.hpp"
#include "test_util.hpp"

namespace pgs {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::Rng;

struct CliRun {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("pgs_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    write_text(dir_ / "cfg.txt",
               "# small scene\nbase_depth = 3\nnum_lods = 3\ndim_feature = 4\ndim_scaling = 6\ndim_offsets = 3\n"
               "hash_levels_3d = 2\nhash_min_res_3d = 4\nhash_max_res_3d = 16\nhash_levels_2d = 1\n"
               "hash_min_res_2d = 32\nhash_max_res_2d = 32\nhash_feature_dim = 2\nhash_log2_table_size = 8\n"
               "mlp_hidden = 8\nnce_negatives = 10\nseed = 3\n");
    Rng rng(1);
    OctreeConfig cfg = testing::small_config(3, 3);
    cfg.bbox_side = 2.0;
    write_file(dir_ / "pts.bin", serialize_raw_points(testing::random_cloud(rng, cfg, 800)));
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static CliRun run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt";
    const std::string cmd = "cd " + dir_.string() + " && " + std::string(PGS_CLI_PATH) + " " + args + " > " +
                            out.string() + " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
  }

  static json run_json(const std::string& args) {
    const CliRun r = run(args + " --json");
    EXPECT_EQ(r.code, 0) << args;
    return json::parse(r.out);
  }

  // Stats aligned to the scene with mixed gradients.
  static void write_stats(const std::string& scene, const std::string& name) {
    const auto store = parse_scene(read_file(dir_ / scene));
    Rng rng(5);
    write_file(dir_ / name, serialize_stats(testing::random_stats(rng, store, AdjustParams{})));
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, Pipeline) {
  const auto built = run_json("build pts.bin -o s.pgsc --config cfg.txt");
  const std::size_t anchors = built["anchors"];
  EXPECT_GT(anchors, 0u);
  EXPECT_EQ(built["anchors_per_level"].size(), 3u);

  write_stats("s.pgsc", "stats.bin");
  const auto adj = run_json("adjust --scene s.pgsc --stats stats.bin -o s2.pgsc --report adj.json --config cfg.txt");
  for (const char* key : {"spawned_per_level", "pruned_per_level", "anchor_counts_after"}) EXPECT_TRUE(adj.contains(key));
  const auto adj_file = read_file(dir_ / "adj.json");
  EXPECT_EQ(json::parse(adj_file.begin(), adj_file.end()), adj);

  for (const std::string mode : {"fitted", "mlp"}) {
    const auto enc = run_json("encode --scene s2.pgsc -o " + mode + ".pgs --mode " + mode + " --config cfg.txt");
    const std::size_t size = fs::file_size(dir_ / (mode + ".pgs"));
    EXPECT_EQ(enc["bytes"].get<std::size_t>(), size);

    const auto ins = run_json("inspect " + mode + ".pgs");
    EXPECT_EQ(ins["total_bytes"].get<std::size_t>(), size);
    EXPECT_EQ(ins["header"]["total_bytes"].get<std::size_t>(),
              Header::parse(read_file(dir_ / (mode + ".pgs"))).serialize().size());

    const auto sim = run_json("stream-sim " + mode + ".pgs");
    ASSERT_EQ(sim["steps"].size(), 3u);
    std::size_t prev = 0;
    for (const auto& s : sim["steps"]) {
      EXPECT_GT(s["cumulative_bytes"].get<std::size_t>(), prev);
      prev = s["cumulative_bytes"];
      EXPECT_TRUE(s["prefix_ok"].get<bool>());
    }
    EXPECT_EQ(prev, size);
    EXPECT_TRUE(sim["violations"].empty());

    const auto dec = run_json("decode " + mode + ".pgs --lod 2 -o d.pgsc");
    EXPECT_EQ(dec["levels_decoded"], 2);
    EXPECT_EQ(parse_scene(read_file(dir_ / "d.pgsc")).count(3), 0u);
  }

  // Re-running produces byte-identical outputs.
  ASSERT_EQ(run("encode --scene s2.pgsc -o again.pgs --mode mlp --config cfg.txt").code, 0);
  EXPECT_EQ(read_file(dir_ / "again.pgs"), read_file(dir_ / "mlp.pgs"));

  // A full decode restores the quantized scene.
  ASSERT_EQ(run("decode fitted.pgs -o full.pgsc").code, 0);
  const auto full = parse_scene(read_file(dir_ / "full.pgsc"));
  EXPECT_EQ(full.size(), parse_scene(read_file(dir_ / "s2.pgsc")).size());

  const CliRun dump = run("dump s2.pgsc");
  EXPECT_EQ(dump.code, 0);
  EXPECT_EQ(dump.out, parse_scene(read_file(dir_ / "s2.pgsc")).debug_dump());
}

TEST_F(Cli, ModelFilesAndAnalyze) {
  ASSERT_EQ(run("build pts.bin -o a.pgsc --config cfg.txt").code, 0);
  const auto init = run_json("init-model --grid-out g.pgh --weights-out w.pgw --config cfg.txt --channels 19");
  EXPECT_EQ(init["channels"], 19);
  const auto enc = run_json("encode --scene a.pgsc -o a.pgs --mode mlp --grid g.pgh --weights w.pgw --config cfg.txt");
  EXPECT_EQ(enc["mode"], "mlp");
  // Weights shaped for another channel count are rejected.
  ASSERT_EQ(run("init-model --grid-out g2.pgh --weights-out w2.pgw --config cfg.txt --channels 7").code, 0);
  EXPECT_EQ(run("encode --scene a.pgsc -o b.pgs --mode mlp --grid g.pgh --weights w2.pgw").code, 2);

  write_stats("a.pgsc", "astats.bin");
  fs::create_directories(dir_ / "renders");
  Image gt(16, 12);
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : gt.pixels) v = u(rng);
  write_png(dir_ / "renders" / "gt.png", gt);
  for (int l = 1; l <= 3; ++l) write_png(dir_ / "renders" / ("lod_" + std::to_string(l) + ".png"), gt);
  const auto rep = run_json("analyze --scene a.pgsc --stats astats.bin --renders renders --nce-samples 20 --seed 4 "
                            "--config cfg.txt");
  for (const char* key : {"nce", "mi", "volume", "rate", "c2f", "total", "stats"}) EXPECT_TRUE(rep.contains(key)) << key;
  EXPECT_NEAR(rep["c2f"]["loss"].get<double>(), 0.0, 1e-12);
  EXPECT_EQ(rep["nce"]["samples"], 20);
  // Zero attributes: every dot product is zero, so the literal form is ln N.
  EXPECT_NEAR(rep["nce"]["literal"].get<double>(), std::log(10.0), 1e-9);
  const auto again = run_json("analyze --scene a.pgsc --stats astats.bin --renders renders --nce-samples 20 --seed 4 "
                              "--config cfg.txt");
  EXPECT_EQ(again, rep);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("encode --scene").code, 1);
  EXPECT_EQ(run("decode missing.pgs -o x.pgsc").code, 3);
  write_text(dir_ / "garbage.pgs", "PGS1 definitely not a stream");
  EXPECT_EQ(run("inspect garbage.pgs").code, 3);
  write_text(dir_ / "bad.txt", "no_such_key = 1\n");
  EXPECT_EQ(run("build pts.bin -o z.pgsc --config bad.txt").code, 2);
  ASSERT_EQ(run("build pts.bin -o e.pgsc --config cfg.txt").code, 0);
  ASSERT_EQ(run("encode --scene e.pgsc -o e.pgs --config cfg.txt").code, 0);
  EXPECT_EQ(run("decode e.pgs --lod 9 -o x.pgsc").code, 2);
  write_text(dir_ / "short_stats.bin", "");
  EXPECT_EQ(run("adjust --scene e.pgsc --stats short_stats.bin -o x.pgsc").code, 3);
  EXPECT_EQ(run("--help").code, 0);
}

}  // namespace
}  // namespace pgs
