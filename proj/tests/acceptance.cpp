// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "grow_oracle.hpp"
#include "pgs/anchor_adjust.hpp"
#include "pgs/bitstream.hpp"
#include "pgs/entropy_model.hpp"
#include "pgs/error.hpp"
#include "pgs/hash_grid.hpp"
#include "pgs/objectives.hpp"
#include "pgs/range_coder.hpp"
#include "test_util.hpp"

namespace pgs {
namespace {

using testing::Rng;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1. Octree invariants under building and fuzzed adjustment.
Outcome octree_invariants() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::size_t violations = 0;
  std::uniform_int_distribution<std::size_t> npts(10, 10000);
  for (int t = 0; t < 1000; ++t) {
    const auto cfg = testing::small_config(1 + static_cast<int>(rng() % 8), 1 + static_cast<int>(rng() % 5));
    const auto s = OctreeStore::build_from_points(cfg, testing::random_cloud(rng, cfg, npts(rng)));
    if (s.validate()) ++violations;
  }
  const double build_time = seconds_since(t0);
  for (int t = 0; t < 1000; ++t) {
    const auto cfg = testing::small_config(1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 4));
    auto s = testing::random_store(rng, cfg, 1 + rng() % 200);
    AdjustParams p;
    p.tau_o = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto st = testing::random_stats(rng, s, p);
    adjust_step(s, st, p);
    if (s.validate()) ++violations;
  }
  const double total = seconds_since(t0);
  return {violations == 0 && total < 60.0,
          fmt("violations=%.0f build=%.2fs total=%.2fs (limit 60s)", static_cast<double>(violations), build_time, total)};
}

// 2. Growing equals the set-theoretic reference.
Outcome grow_oracle() {
  const auto t0 = Clock::now();
  Rng rng(202);
  int mismatches = 0, instances = 0;
  std::size_t largest = 0;
  while (instances < 200) {
    const auto cfg = testing::small_config(1 + static_cast<int>(rng() % 4), 2 + static_cast<int>(rng() % 3));
    auto s = testing::random_store(rng, cfg, 5 + rng() % 200);
    if (s.size() > 500) continue;
    largest = std::max(largest, s.size());
    AdjustParams p;
    const auto st = testing::random_stats(rng, s, p);
    const auto expected = testing::reference_grow(s, st, p);
    grow(s, st, p);
    if (s.validate() || testing::cells_of(s) != expected) ++mismatches;
    ++instances;
  }
  const double total = seconds_since(t0);
  return {mismatches == 0 && total < 30.0, fmt("mismatches=%.0f/200 largest_store=%.0f time=%.2fs (limit 30s)",
                                               mismatches, static_cast<double>(largest), total)};
}

CdfTable random_table(Rng& rng) {
  const std::size_t n = 1 + rng() % 1000;
  std::vector<double> p(n);
  std::exponential_distribution<double> e(1.0);
  for (auto& v : p) v = std::pow(e(rng), 3.0);
  return cdf_quantize(p);
}

// 3. Range coder roundtrip.
Outcome range_coder_roundtrip() {
  int failures = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(3000 + seed);
    std::vector<CdfTable> pool;
    for (int i = 0; i < 32; ++i) pool.push_back(random_table(rng));
    std::vector<CdfTable> tables;
    std::vector<std::size_t> symbols;
    tables.reserve(100000);
    symbols.reserve(100000);
    for (int i = 0; i < 100000; ++i) {
      const auto& t = pool[rng() % pool.size()];
      tables.push_back(t);
      symbols.push_back(rng() % t.size());
    }
    const auto bytes = encode_symbols(symbols, tables);
    RangeDecoder dec(bytes);
    bool ok = true;
    for (std::size_t i = 0; i < symbols.size() && ok; ++i) ok = dec.decode(tables[i]) == symbols[i];
    if (!ok || dec.consumed() != bytes.size()) ++failures;
  }
  return {failures == 0, fmt("failures=%.0f/100 seeds, 1e5 symbols each", failures)};
}

// 4. Coded size against the model's ideal cost.
Outcome rate_fidelity() {
  struct Case {
    double mu, sigma, q;
  };
  const std::vector<Case> cases{{0.0, 1.0, 0.2}, {0.3, 0.1, 0.05}, {-2.0, 3.0, 1.0}, {0.0, 0.1, 0.001}, {5.0, 0.5, 1.0}};
  Rng rng(404);
  bool pass = true;
  double worst = 0.0;
  for (const auto& c : cases) {
    std::normal_distribution<double> n(c.mu, c.sigma);
    const EntropyParams params{{c.mu}, {c.sigma}, {c.q}};
    const GaussianSymbolCoder coder(c.mu, c.sigma, c.q);
    RangeEncoder enc;
    double ideal = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const std::vector<double> x{n(rng)};
      const auto qa = quantize(x, params);
      ideal += entropy_bits(qa.symbols, params);
      coder.encode(enc, qa.symbols[0]);
    }
    const double actual = 8.0 * static_cast<double>(enc.finish().size());
    const double slack = std::abs(actual - ideal) - (0.01 * ideal + 64.0);
    worst = std::max(worst, std::abs(actual - ideal) / ideal);
    if (slack > 0.0) pass = false;
  }
  return {pass, fmt("worst relative gap=%.4f%% over %.0f priors (limit 1%% + 64 bits)", 100.0 * worst,
                    static_cast<double>(cases.size()))};
}

HashGridConfig small_grid() {
  HashGridConfig g;
  g.levels_3d = 2;
  g.min_res_3d = 4;
  g.max_res_3d = 16;
  g.levels_2d = 1;
  g.min_res_2d = g.max_res_2d = 32;
  g.feature_dim = 2;
  g.log2_table_size = 8;
  return g;
}

bool same_prefix(const OctreeStore& a, const OctreeStore& b, int k) {
  for (int l = 1; l <= k; ++l) {
    if (a.count(l) != b.count(l)) return false;
    auto ib = b.level(l).begin();
    for (const auto& [key, anchor] : a.level(l)) {
      if (ib->first != key || ib->second.coord != anchor.coord || ib->second.attrs != anchor.attrs) return false;
      ++ib;
    }
  }
  return true;
}

struct CodecResults {
  int roundtrip_failures = 0;
  int prefix_failures = 0;
  int scenes = 0;
};

// 5 and 6 share their fuzzed scenes.
CodecResults codec_fuzz() {
  CodecResults r;
  Rng rng(505);
  for (int t = 0; t < 100; ++t) {
    const auto cfg = testing::small_config(1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 5),
                                           1 + static_cast<int>(rng() % 8), 1 + static_cast<int>(rng() % 3),
                                           1 + static_cast<int>(rng() % 4));
    auto store = testing::random_store(rng, cfg, 1 + rng() % 300);
    for (const bool mlp : {false, true}) {
      const CodingModel model =
          mlp ? CodingModel::mlp(HashGrid::seeded(small_grid(), rng()),
                                 MlpWeights::seeded(2 * small_grid().output_dim(), 16, cfg.channel_count(), rng()))
              : CodingModel::fitted();
      const auto enc = encode_scene(store, model);
      const auto full = decode_prefix(enc.bytes, cfg.num_lods);
      bool round_ok = full.bytes_read == enc.bytes.size() && !full.store.validate() &&
                      same_prefix(full.store, enc.reconstruction, cfg.num_lods) &&
                      full.store.size() == store.size();
      // Independently of the encoder's reconstruction: fitted mode quantizes
      // with the float32 Q0 step, MLP steps lie in (0, 2 Q0).
      for (int l = 1; l <= cfg.num_lods && round_ok; ++l) {
        for (const auto& [key, a] : store.level(l)) {
          const Anchor* d = full.store.find(a.coord);
          if (!d) {
            round_ok = false;
            break;
          }
          for (int c = 0; c < cfg.channel_count(); ++c) {
            const double q0 = static_cast<float>(cfg.q0_of(c));
            const double orig = a.attrs[static_cast<std::size_t>(c)];
            const double dec = d->attrs[static_cast<std::size_t>(c)];
            if (mlp ? std::abs(dec - orig) > q0 * (1 + 1e-9) : dec != std::floor(orig / q0 + 0.5) * q0)
              round_ok = false;
          }
        }
      }
      if (!round_ok) ++r.roundtrip_failures;
      bool prefix_ok = true;
      for (int k = 1; k <= cfg.num_lods; ++k) {
        const auto part = decode_prefix(enc.bytes, k);
        prefix_ok = prefix_ok && same_prefix(part.store, full.store, k);
        for (int l = k + 1; l <= cfg.num_lods; ++l) prefix_ok = prefix_ok && part.store.count(l) == 0;
      }
      if (!prefix_ok) ++r.prefix_failures;
      ++r.scenes;
    }
  }
  return r;
}

// Entropy of N(0, sigma) quantized to bins of width q centred on kq, in bits.
double analytic_bin_entropy(double sigma, double q) {
  auto cdf = [&](double x) { return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0))); };
  double h = 0.0;
  const int reach = static_cast<int>(std::ceil(40.0 * sigma / q)) + 2;
  for (int k = -reach; k <= reach; ++k) {
    const double p = cdf((k + 0.5) * q) - cdf((k - 0.5) * q);
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

// 7. Fitted-prior coding cost on Gaussian attributes.
Outcome compression_sanity() {
  OctreeConfig cfg;  // default dims and Q0 steps
  cfg.base_depth = 4;
  cfg.num_lods = 3;
  Rng rng(707);
  auto store = OctreeStore::build_from_points(cfg, testing::random_cloud(rng, cfg, 20000));
  std::normal_distribution<double> n(0.0, 0.1);
  for (int l = 1; l <= cfg.num_lods; ++l)
    for (auto& [key, a] : store.level(l))
      for (auto& v : a.attrs) v = n(rng);
  const auto enc = encode_scene(store, CodingModel::fitted());
  const auto report = inspect(enc.bytes);
  double attr_bytes = 0.0;
  for (const auto& c : report.chunks) attr_bytes += static_cast<double>(c.attribute_bytes);
  const double symbols = static_cast<double>(store.size()) * cfg.channel_count();
  const double coded = 8.0 * attr_bytes / symbols;
  double analytic = 0.0;
  for (int c = 0; c < cfg.channel_count(); ++c) analytic += analytic_bin_entropy(0.1, cfg.q0_of(c));
  analytic /= cfg.channel_count();
  const double rel = std::abs(coded - analytic) / analytic;
  return {rel <= 0.05, fmt("coded=%.5f analytic=%.5f bits/symbol, rel=%.3f%% (limit 5%%)", coded, analytic, 100 * rel)};
}

// 8. 23-bit structural addressing.
Outcome addressing() {
  Rng rng(808);
  std::size_t wrong = 0, pairs = 0;
  while (pairs < 1000000) {
    const int level = 2 + static_cast<int>(rng() % 6);
    const auto cfg = testing::small_config(3, 7);
    const std::uint32_t res = cfg.resolution(level - 1);
    // Distinct random parents in Morton order.
    std::vector<std::uint64_t> keys(4096);
    for (auto& k : keys) {
      const VoxelCoord c{static_cast<std::uint32_t>(rng() % res), static_cast<std::uint32_t>(rng() % res),
                         static_cast<std::uint32_t>(rng() % res), level - 1};
      k = morton_key(c);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<VoxelCoord> parents;
    for (auto k : keys) parents.push_back(from_morton(k, level - 1));
    std::vector<VoxelCoord> children;
    for (int i = 0; i < 10000; ++i) {
      const auto& p = parents[rng() % parents.size()];
      const unsigned o = static_cast<unsigned>(rng() % 8);
      children.push_back({2 * p.x + (o & 1u), 2 * p.y + ((o >> 1) & 1u), 2 * p.z + ((o >> 2) & 1u), level});
    }
    const auto block = encode_structural(children, parents, level);
    const auto back = decode_structural(block, children.size(), parents);
    for (std::size_t i = 0; i < children.size(); ++i)
      if (back[i] != children[i]) ++wrong;
    pairs += children.size();
  }

  std::string overflow = "not raised";
  {
    const std::size_t n = (std::size_t{1} << 20) + 1;
    std::vector<VoxelCoord> prev;
    prev.reserve(n);
    for (std::size_t i = 0; i < n; ++i) prev.push_back(from_morton(i, 4));
    const std::vector<VoxelCoord> child{child_coord(prev.back(), 0)};
    try {
      encode_structural(child, prev, 5);
    } catch (const InvariantError& e) {
      overflow = std::string(e.what()).find("20-bit") != std::string::npos ? "raised" : "wrong message";
    }
  }
  return {wrong == 0 && overflow == "raised",
          fmt("wrong=%.0f of %.0f pairs", static_cast<double>(wrong), static_cast<double>(pairs)) +
              ", overflow at 2^20+1 parents: " + overflow};
}

// 9. Objective values on known cases.
Outcome objectives() {
  Rng rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image x(48, 40);
  for (auto& v : x.pixels) v = u(rng);
  const double s = ssim(x, x);
  std::vector<ImagePair> pairs(3, ImagePair{x, x});
  const double c2f = c2f_loss(pairs, 0.2);

  const std::vector<double> a{0.4, -1.2, 0.7, 0.05};
  const std::vector<double> p{1.0, 0.5, -0.25, 2.0};
  const std::vector<std::vector<double>> negs(100, p);
  const double nce = info_nce(a, p, negs);

  std::vector<std::vector<double>> xs(100000), ind_a(100000), ind_b(100000);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = {(static_cast<double>(rng() % 16) + 0.5) / 16.0};
    ind_a[i] = {u(rng)};
    ind_b[i] = {u(rng)};
  }
  const double mi_same = mi_estimate(xs, xs, 16);
  const double mi_ind = mi_estimate(ind_a, ind_b, 16);

  const bool pass = std::abs(s - 1.0) <= 1e-9 && c2f == 0.0 && std::abs(nce - std::log(100.0)) <= 1e-9 &&
                    std::abs(mi_same - std::log(16.0)) <= 0.02 * std::log(16.0) && mi_ind < 0.02;
  char buf[256];
  std::snprintf(buf, sizeof buf, "ssim-1=%.2e c2f=%.2e nce-ln100=%.2e mi_same=%.4f (ln16=%.4f) mi_indep=%.5f",
                s - 1.0, c2f, nce - std::log(100.0), mi_same, std::log(16.0), mi_ind);
  return {pass, buf};
}

// 10. Hash-grid bit cost and header accounting.
Outcome hash_accounting() {
  Rng rng(1010);
  int cost_failures = 0;
  for (int t = 0; t < 100; ++t) {
    HashGridConfig cfg = small_grid();
    cfg.log2_table_size = 4 + static_cast<int>(rng() % 8);
    cfg.feature_dim = 1 + static_cast<int>(rng() % 4);
    HashGrid g(cfg);
    const double frac = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::bernoulli_distribution neg(frac);
    const int levels = cfg.levels_3d + cfg.levels_2d;
    for (int l = 0; l < levels; ++l)
      for (std::size_t i = 0; i < cfg.table_size(); ++i)
        for (int f = 0; f < cfg.feature_dim; ++f)
          if (neg(rng)) g.set_entry(l, i, f, -1);
    const double m = static_cast<double>(cfg.entry_count());
    const double pp = static_cast<double>(g.positive_count()) / m;
    const double h2 = (pp <= 0.0 || pp >= 1.0) ? 0.0 : -pp * std::log2(pp) - (1 - pp) * std::log2(1 - pp);
    // Zero-entropy grids still pay the probability floor; compare against that.
    const double expected = h2 > 0.0 ? m * h2 : m * -std::log2(1.0 - 1.0 / 65536.0);
    if (std::abs(hash_bit_cost(g) - expected) > 1e-9) ++cost_failures;
  }

  int header_failures = 0;
  for (int t = 0; t < 20; ++t) {
    const auto cfg = testing::small_config(2, 1 + static_cast<int>(rng() % 4));
    const auto store = testing::random_store(rng, cfg, 1 + rng() % 100);
    const bool mlp = t % 2 == 1;
    const CodingModel model =
        mlp ? CodingModel::mlp(HashGrid::seeded(small_grid(), rng()),
                               MlpWeights::seeded(2 * small_grid().output_dim(), 8, cfg.channel_count(), rng()))
            : CodingModel::fitted();
    const auto enc = encode_scene(store, model);
    std::size_t consumed = 0;
    Header::parse(enc.bytes, &consumed);
    const auto report = inspect(enc.bytes);
    std::size_t chunk_total = 0;
    for (const auto& c : report.chunks) chunk_total += c.total();
    if (report.header_bytes != consumed || report.header_bytes + chunk_total != enc.bytes.size() ||
        report.total_bytes != enc.bytes.size())
      ++header_failures;
  }
  return {cost_failures == 0 && header_failures == 0,
          fmt("bit-cost mismatches=%.0f/100, header accounting mismatches=%.0f/20", cost_failures, header_failures)};
}

}  // namespace
}  // namespace pgs

int main() {
  using pgs::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"octree invariants under build and adjust fuzzing", pgs::octree_invariants},
      {"growing matches the brute-force reference", pgs::grow_oracle},
      {"range coder lossless roundtrip", pgs::range_coder_roundtrip},
      {"coded rate within 1% + 64 bits of model cost", pgs::rate_fidelity},
      {"full codec roundtrip in both prior modes", nullptr},
      {"prefix decoding equals level restriction", nullptr},
      {"fitted-prior cost within 5% of bin entropy", pgs::compression_sanity},
      {"23-bit parent/octant addressing", pgs::addressing},
      {"objective values on known cases", pgs::objectives},
      {"hash bit cost and header accounting", pgs::hash_accounting},
  };
  pgs::CodecResults codec;
  bool codec_done = false;
  std::string codec_error;
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = pgs::Clock::now();
    Outcome o;
    try {
      if (i == 4 || i == 5) {
        if (!codec_done) {
          codec_done = true;
          try {
            codec = pgs::codec_fuzz();
          } catch (const std::exception& e) {
            codec_error = e.what();
          }
        }
        if (!codec_error.empty()) throw std::runtime_error(codec_error);
        const int bad = i == 4 ? codec.roundtrip_failures : codec.prefix_failures;
        o = {bad == 0, pgs::fmt("failures=%.0f/%.0f encodes", bad, codec.scenes)};
      } else {
        o = criteria[i].second();
      }
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu: %s -- %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), pgs::seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
