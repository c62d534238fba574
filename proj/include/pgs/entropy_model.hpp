#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pgs/range_coder.hpp"
#include "pgs/scene.hpp"

namespace pgs {

inline constexpr double kSigmaMin = 1e-4;
inline constexpr double kProbFloor = 1.0 / 65536.0;
inline constexpr std::int32_t kSymbolMin = -32768;
inline constexpr std::int32_t kSymbolMax = 32767;

// One hidden layer, ReLU, linear head. Weights row-major [out][in].
struct Mlp {
  int input_dim = 0;
  int hidden_dim = 0;
  int output_dim = 0;
  std::vector<float> w1, b1, w2, b2;

  void validate() const;
  std::vector<double> forward(std::span<const double> input) const;
};

// MLP_d predicts (mu, raw sigma) for every channel: outputs [mu_0..mu_{C-1},
// s_0..s_{C-1}]. MLP_q predicts one raw quantization logit per channel.
struct MlpWeights {
  Mlp density;
  Mlp quant;

  int channels() const { return quant.output_dim; }
  int input_dim() const { return density.input_dim; }
  void validate() const;
  // Throws InvariantError unless shaped for `context_dim` inputs (h || h_parent)
  // and `channels` outputs.
  void check_shape(int context_dim, int channels) const;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
  static MlpWeights seeded(int input_dim, int hidden_dim, int channels, std::uint64_t seed);
  static MlpWeights zeros(int input_dim, int hidden_dim, int channels);

  // Architecture header + float32 matrices; the block embedded in headers.
  std::vector<std::uint8_t> serialize() const;
  static MlpWeights deserialize(std::span<const std::uint8_t> block);
  // Weights file: "PGW1" + serialize().
  std::vector<std::uint8_t> to_file_bytes() const;
  static MlpWeights from_file_bytes(std::span<const std::uint8_t> bytes);

  friend bool operator==(const MlpWeights&, const MlpWeights&);
};

struct EntropyParams {
  std::vector<double> mu, sigma, q;

  std::size_t channels() const { return mu.size(); }
};

struct QuantizedAttributes {
  std::vector<std::int32_t> symbols;
  std::vector<double> values;  // symbols[c] * q[c]
};

double softplus(double x);

// 1 + tanh(x), written as 2 / (1 + exp(-2x)) so it never collapses to 0 for
// moderately negative x.
double one_plus_tanh(double x);

EntropyParams predict_params(const MlpWeights& w, std::span<const double> h, std::span<const double> h_parent,
                             const OctreeConfig& cfg);

// k = round_half_up(A / q); throws InvariantError when k leaves int16.
QuantizedAttributes quantize(std::span<const double> attrs, const EntropyParams& params);

// Gaussian mass over the bin [kq - q/2, kq + q/2], floored at 2^-16.
double symbol_probability(std::int32_t k, double mu, double sigma, double q);
double symbol_bits(std::int32_t k, double mu, double sigma, double q);

// Sum over channels of -log2 p(k_c).
double entropy_bits(std::span<const std::int32_t> symbols, const EntropyParams& params);

// (L_entropy + L_hash) / (N * C).
double normalized_rate(double total_bits, std::size_t anchor_count, const OctreeConfig& cfg);

struct ChannelPrior {
  double mu = 0.0;
  double sigma = 1.0;
};

// Per-channel sample mean and std (floored at sigma_min) over a set of
// attribute blocks. An empty set gives mu = 0, sigma = 1.
std::vector<ChannelPrior> fit_static_prior(std::span<const std::vector<double>* const> attrs, int channels);

// Static prior with q = Q0 of each channel's group.
EntropyParams static_params(std::span<const ChannelPrior> prior, const OctreeConfig& cfg);

// Turns one (mu, sigma, q) triple into a finite coding alphabet: a window of
// symbols around round(mu / q) plus an escape. Escaped symbols follow as a
// raw 16-bit value in two uniform bytes.
class GaussianSymbolCoder {
 public:
  static constexpr double kWindowSigmas = 8.0;
  static constexpr std::int32_t kMaxHalfWidth = 1024;

  GaussianSymbolCoder(double mu, double sigma, double q);

  void encode(RangeEncoder& enc, std::int32_t k) const;
  std::int32_t decode(RangeDecoder& dec) const;

  std::int32_t window_low() const { return lo_; }
  std::int32_t window_high() const { return hi_; }
  const CdfTable& table() const { return table_; }
  // Model cost of k under the quantized table, in bits.
  double cost_bits(std::int32_t k) const;

 private:
  std::int32_t lo_ = 0, hi_ = 0;
  CdfTable table_;
};

}  // namespace pgs
