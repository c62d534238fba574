#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pgs {

inline constexpr int kProbBits = 16;
inline constexpr std::uint32_t kProbTotal = 1u << kProbBits;

// Cumulative frequency table with total exactly 2^16 and every symbol
// frequency >= 1. cum has size() + 1 entries, cum.front() == 0.
class CdfTable {
 public:
  CdfTable() = default;
  explicit CdfTable(std::vector<std::uint32_t> cum);  // validates

  std::size_t size() const { return cum_.size() - 1; }
  std::uint32_t low(std::size_t s) const { return cum_[s]; }
  std::uint32_t freq(std::size_t s) const { return cum_[s + 1] - cum_[s]; }
  // Symbol s with low(s) <= target < low(s + 1).
  std::size_t find(std::uint32_t target) const;
  const std::vector<std::uint32_t>& cumulative() const { return cum_; }

  static CdfTable uniform(std::size_t symbols);

 private:
  std::vector<std::uint32_t> cum_{0, kProbTotal};
};

// Scales a (not necessarily normalized) probability vector to integer
// frequencies summing to 2^16. Symbols that would round to zero get one
// count, taken from the currently largest frequency.
CdfTable cdf_quantize(std::span<const double> probabilities);

// Byte-oriented range coder: 64-bit low with carry propagation through a
// cached byte, 32-bit range renormalized to >= 2^24. The last symbol of a
// table also receives the truncation remainder of the range.
class RangeEncoder {
 public:
  void encode(const CdfTable& table, std::size_t symbol);
  void encode(std::uint32_t low, std::uint32_t freq, bool last);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xffffffffu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  // Throws FormatError when fewer than the 5 priming bytes are present.
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  std::size_t decode(const CdfTable& table);
  // Number of input bytes consumed so far.
  std::size_t consumed() const { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xffffffffu;
  std::uint32_t code_ = 0;
};

std::vector<std::uint8_t> encode_symbols(std::span<const std::size_t> symbols, std::span<const CdfTable> tables);
std::vector<std::size_t> decode_symbols(std::span<const std::uint8_t> bytes, std::span<const CdfTable> tables);

}  // namespace pgs
