#include "pgs/entropy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "pgs/byte_io.hpp"
#include "pgs/error.hpp"

namespace pgs {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Upper tail 0.5 * erfc(|z| / sqrt 2); keeps precision far from the mean.
inline double tail(double z) { return 0.5 * std::erfc(std::abs(z) * kInvSqrt2); }

// Mass of N(0,1) on [a, b], a <= b, evaluated on the side that avoids
// cancellation.
inline double interval_mass(double a, double b) {
  if (a >= 0.0) return tail(a) - tail(b);
  if (b <= 0.0) return tail(b) - tail(a);
  return 1.0 - tail(a) - tail(b);
}

void write_mlp(ByteWriter& w, const Mlp& m) {
  for (const auto* v : {&m.w1, &m.b1, &m.w2, &m.b2})
    for (float x : *v) w.f32(x);
}

void read_mlp(ByteReader& r, Mlp& m) {
  auto fill = [&r](std::vector<float>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = r.f32();
  };
  const auto in = static_cast<std::size_t>(m.input_dim);
  const auto hid = static_cast<std::size_t>(m.hidden_dim);
  const auto out = static_cast<std::size_t>(m.output_dim);
  fill(m.w1, hid * in);
  fill(m.b1, hid);
  fill(m.w2, out * hid);
  fill(m.b2, out);
}

Mlp make_mlp(int in, int hidden, int out) {
  Mlp m;
  m.input_dim = in;
  m.hidden_dim = hidden;
  m.output_dim = out;
  m.w1.assign(static_cast<std::size_t>(hidden) * in, 0.0f);
  m.b1.assign(static_cast<std::size_t>(hidden), 0.0f);
  m.w2.assign(static_cast<std::size_t>(out) * hidden, 0.0f);
  m.b2.assign(static_cast<std::size_t>(out), 0.0f);
  return m;
}

void fill_uniform(std::vector<float>& v, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : v) x = static_cast<float>(dist(rng));
}

}  // namespace

void Mlp::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) throw InvariantError("mlp: dimensions must be positive");
  const auto in = static_cast<std::size_t>(input_dim);
  const auto hid = static_cast<std::size_t>(hidden_dim);
  const auto out = static_cast<std::size_t>(output_dim);
  if (w1.size() != hid * in || b1.size() != hid || w2.size() != out * hid || b2.size() != out)
    throw InvariantError("mlp: weight shapes do not match the architecture");
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  if (input.size() != static_cast<std::size_t>(input_dim)) throw InvariantError("mlp: input width mismatch");
  const auto in = static_cast<std::size_t>(input_dim);
  const auto hid = static_cast<std::size_t>(hidden_dim);
  std::vector<double> hidden(hid);
  for (std::size_t i = 0; i < hid; ++i) {
    double acc = b1[i];
    const float* row = &w1[i * in];
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * input[j];
    hidden[i] = acc > 0.0 ? acc : 0.0;
  }
  std::vector<double> out(static_cast<std::size_t>(output_dim));
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = b2[i];
    const float* row = &w2[i * hid];
    for (std::size_t j = 0; j < hid; ++j) acc += row[j] * hidden[j];
    out[i] = acc;
  }
  return out;
}

void MlpWeights::validate() const {
  density.validate();
  quant.validate();
  if (density.input_dim != quant.input_dim) throw InvariantError("mlp weights: input widths differ");
  if (density.output_dim != 2 * quant.output_dim)
    throw InvariantError("mlp weights: density head must be twice the quantization head");
}

void MlpWeights::check_shape(int context_dim, int channels_expected) const {
  validate();
  if (input_dim() != context_dim)
    throw InvariantError("mlp weights: expected input width " + std::to_string(context_dim) + ", got " +
                         std::to_string(input_dim()));
  if (channels() != channels_expected)
    throw InvariantError("mlp weights: expected " + std::to_string(channels_expected) + " channels, got " +
                         std::to_string(channels()));
}

MlpWeights MlpWeights::zeros(int input_dim, int hidden_dim, int channels) {
  MlpWeights w;
  w.density = make_mlp(input_dim, hidden_dim, 2 * channels);
  w.quant = make_mlp(input_dim, hidden_dim, channels);
  w.validate();
  return w;
}

MlpWeights MlpWeights::seeded(int input_dim, int hidden_dim, int channels, std::uint64_t seed) {
  MlpWeights w = zeros(input_dim, hidden_dim, channels);
  std::mt19937_64 rng(seed);
  for (Mlp* m : {&w.density, &w.quant}) {
    fill_uniform(m->w1, input_dim, rng);
    fill_uniform(m->b1, input_dim, rng);
    fill_uniform(m->w2, hidden_dim, rng);
    fill_uniform(m->b2, hidden_dim, rng);
  }
  return w;
}

std::vector<std::uint8_t> MlpWeights::serialize() const {
  validate();
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(input_dim()));
  w.u32(static_cast<std::uint32_t>(density.hidden_dim));
  w.u32(static_cast<std::uint32_t>(quant.hidden_dim));
  w.u32(static_cast<std::uint32_t>(channels()));
  write_mlp(w, density);
  write_mlp(w, quant);
  return w.take();
}

MlpWeights MlpWeights::deserialize(std::span<const std::uint8_t> block) {
  ByteReader r(block, "mlp weights block");
  const std::uint32_t in = r.u32();
  const std::uint32_t hid_d = r.u32();
  const std::uint32_t hid_q = r.u32();
  const std::uint32_t ch = r.u32();
  constexpr std::uint32_t kMaxDim = 1u << 16;
  if (in == 0 || hid_d == 0 || hid_q == 0 || ch == 0 || in > kMaxDim || hid_d > kMaxDim || hid_q > kMaxDim ||
      ch > kMaxDim)
    throw FormatError("mlp weights block: implausible architecture");
  MlpWeights w;
  w.density.input_dim = w.quant.input_dim = static_cast<int>(in);
  w.density.hidden_dim = static_cast<int>(hid_d);
  w.quant.hidden_dim = static_cast<int>(hid_q);
  w.density.output_dim = static_cast<int>(2 * ch);
  w.quant.output_dim = static_cast<int>(ch);
  read_mlp(r, w.density);
  read_mlp(r, w.quant);
  if (!r.at_end()) throw FormatError("mlp weights block: trailing bytes");
  return w;
}

std::vector<std::uint8_t> MlpWeights::to_file_bytes() const {
  ByteWriter w;
  w.tag("PGW1");
  w.bytes(serialize());
  return w.take();
}

MlpWeights MlpWeights::from_file_bytes(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "mlp weights file");
  r.expect_tag("PGW1");
  return deserialize(bytes.subspan(4));
}

bool operator==(const MlpWeights& a, const MlpWeights& b) { return a.serialize() == b.serialize(); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double one_plus_tanh(double x) { return 2.0 / (1.0 + std::exp(-2.0 * x)); }

EntropyParams predict_params(const MlpWeights& w, std::span<const double> h, std::span<const double> h_parent,
                             const OctreeConfig& cfg) {
  const int channels = cfg.channel_count();
  w.check_shape(static_cast<int>(h.size() + h_parent.size()), channels);

  std::vector<double> context;
  context.reserve(h.size() + h_parent.size());
  context.insert(context.end(), h.begin(), h.end());
  context.insert(context.end(), h_parent.begin(), h_parent.end());

  const auto d = w.density.forward(context);
  const auto qraw = w.quant.forward(context);

  EntropyParams p;
  const auto n = static_cast<std::size_t>(channels);
  p.mu.resize(n);
  p.sigma.resize(n);
  p.q.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    p.mu[c] = d[c];
    p.sigma[c] = softplus(d[n + c]) + kSigmaMin;
    const double q0 = cfg.q0_of(static_cast<int>(c));
    // Keep q strictly inside (0, 2 Q0) even where 1 + tanh saturates.
    const double q = q0 * one_plus_tanh(qraw[c]);
    p.q[c] = std::clamp(q, q0 * 1e-9, std::nextafter(2.0 * q0, 0.0));
  }
  return p;
}

QuantizedAttributes quantize(std::span<const double> attrs, const EntropyParams& params) {
  if (attrs.size() != params.channels()) throw InvariantError("quantize: attribute width does not match the params");
  QuantizedAttributes out;
  out.symbols.resize(attrs.size());
  out.values.resize(attrs.size());
  for (std::size_t c = 0; c < attrs.size(); ++c) {
    const double k = round_half_up(attrs[c] / params.q[c]);
    if (!(k >= kSymbolMin && k <= kSymbolMax))
      throw InvariantError("quantize: symbol for channel " + std::to_string(c) + " exceeds the 16-bit range");
    out.symbols[c] = static_cast<std::int32_t>(k);
    out.values[c] = out.symbols[c] * params.q[c];
  }
  return out;
}

double symbol_probability(std::int32_t k, double mu, double sigma, double q) {
  const double center = k * q;
  const double a = (center - 0.5 * q - mu) / sigma;
  const double b = (center + 0.5 * q - mu) / sigma;
  return std::max(interval_mass(a, b), kProbFloor);
}

double symbol_bits(std::int32_t k, double mu, double sigma, double q) {
  return -std::log2(symbol_probability(k, mu, sigma, q));
}

double entropy_bits(std::span<const std::int32_t> symbols, const EntropyParams& params) {
  if (symbols.size() != params.channels()) throw InvariantError("entropy_bits: width mismatch");
  double bits = 0.0;
  for (std::size_t c = 0; c < symbols.size(); ++c)
    bits += symbol_bits(symbols[c], params.mu[c], params.sigma[c], params.q[c]);
  return bits;
}

double normalized_rate(double total_bits, std::size_t anchor_count, const OctreeConfig& cfg) {
  if (anchor_count == 0) throw InvariantError("normalized_rate: no anchors");
  return total_bits / (static_cast<double>(anchor_count) * cfg.channel_count());
}

std::vector<ChannelPrior> fit_static_prior(std::span<const std::vector<double>* const> attrs, int channels) {
  const auto n = static_cast<std::size_t>(channels);
  std::vector<ChannelPrior> prior(n);
  if (attrs.empty()) return prior;
  for (std::size_t c = 0; c < n; ++c) {
    double mean = 0.0;
    for (const auto* a : attrs) mean += (*a)[c];
    mean /= static_cast<double>(attrs.size());
    double var = 0.0;
    for (const auto* a : attrs) {
      const double d = (*a)[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(attrs.size());
    prior[c] = {mean, std::max(std::sqrt(var), kSigmaMin)};
  }
  return prior;
}

EntropyParams static_params(std::span<const ChannelPrior> prior, const OctreeConfig& cfg) {
  if (prior.size() != static_cast<std::size_t>(cfg.channel_count()))
    throw InvariantError("static_params: prior width does not match the config");
  EntropyParams p;
  for (std::size_t c = 0; c < prior.size(); ++c) {
    p.mu.push_back(prior[c].mu);
    p.sigma.push_back(prior[c].sigma);
    p.q.push_back(cfg.q0_of(static_cast<int>(c)));
  }
  return p;
}

GaussianSymbolCoder::GaussianSymbolCoder(double mu, double sigma, double q) {
  if (!(sigma > 0.0) || !(q > 0.0) || !std::isfinite(mu))
    throw InvariantError("symbol coder: need finite mu and positive sigma, q");
  const double center = std::clamp(round_half_up(mu / q), double{kSymbolMin}, double{kSymbolMax});
  const double half = std::min<double>(kMaxHalfWidth, std::ceil(kWindowSigmas * sigma / q) + 1.0);
  lo_ = static_cast<std::int32_t>(std::max(center - half, double{kSymbolMin}));
  hi_ = static_cast<std::int32_t>(std::min(center + half, double{kSymbolMax}));

  const auto n = static_cast<std::size_t>(hi_ - lo_ + 1);
  // z at every bin boundary, shared by neighbouring bins.
  std::vector<double> z(n + 1);
  for (std::size_t i = 0; i <= n; ++i) z[i] = ((static_cast<double>(lo_) + static_cast<double>(i) - 0.5) * q - mu) / sigma;

  std::vector<double> p(n + 1);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(interval_mass(z[i], z[i + 1]), kProbFloor);
  const double below = z[0] < 0.0 ? tail(z[0]) : 1.0 - tail(z[0]);
  const double above = z[n] > 0.0 ? tail(z[n]) : 1.0 - tail(z[n]);
  p[n] = std::max(below + above, kProbFloor);
  table_ = cdf_quantize(p);
}

void GaussianSymbolCoder::encode(RangeEncoder& enc, std::int32_t k) const {
  if (k < kSymbolMin || k > kSymbolMax) throw InvariantError("symbol coder: symbol outside int16");
  if (k >= lo_ && k <= hi_) {
    enc.encode(table_, static_cast<std::size_t>(k - lo_));
    return;
  }
  enc.encode(table_, table_.size() - 1);
  const auto raw = static_cast<std::uint32_t>(k - kSymbolMin);
  static const CdfTable byte_table = CdfTable::uniform(256);
  enc.encode(byte_table, raw >> 8);
  enc.encode(byte_table, raw & 0xffu);
}

std::int32_t GaussianSymbolCoder::decode(RangeDecoder& dec) const {
  const std::size_t s = dec.decode(table_);
  if (s + 1 < table_.size()) return lo_ + static_cast<std::int32_t>(s);
  static const CdfTable byte_table = CdfTable::uniform(256);
  const auto hi = static_cast<std::uint32_t>(dec.decode(byte_table));
  const auto lo = static_cast<std::uint32_t>(dec.decode(byte_table));
  const std::int32_t k = static_cast<std::int32_t>((hi << 8) | lo) + kSymbolMin;
  if (k >= lo_ && k <= hi_) throw FormatError("symbol coder: escape used for an in-window symbol");
  return k;
}

double GaussianSymbolCoder::cost_bits(std::int32_t k) const {
  auto bits = [](std::uint32_t f) { return kProbBits - std::log2(static_cast<double>(f)); };
  if (k >= lo_ && k <= hi_) return bits(table_.freq(static_cast<std::size_t>(k - lo_)));
  return bits(table_.freq(table_.size() - 1)) + 16.0;
}

}  // namespace pgs
