#include "pgs/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pgs/error.hpp"

namespace pgs {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
}

CdfTable::CdfTable(std::vector<std::uint32_t> cum) : cum_(std::move(cum)) {
  if (cum_.size() < 2 || cum_.front() != 0 || cum_.back() != kProbTotal)
    throw InvariantError("cdf table must start at 0 and end at 2^16");
  for (std::size_t i = 1; i < cum_.size(); ++i)
    if (cum_[i] <= cum_[i - 1]) throw InvariantError("cdf table must be strictly increasing");
}

std::size_t CdfTable::find(std::uint32_t target) const {
  auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
  return static_cast<std::size_t>(it - cum_.begin()) - 1;
}

CdfTable CdfTable::uniform(std::size_t symbols) {
  if (symbols == 0 || symbols > kProbTotal) throw InvariantError("uniform table: bad alphabet size");
  std::vector<std::uint32_t> cum(symbols + 1);
  for (std::size_t i = 0; i <= symbols; ++i)
    cum[i] = static_cast<std::uint32_t>((static_cast<std::uint64_t>(i) * kProbTotal) / symbols);
  return CdfTable(std::move(cum));
}

CdfTable cdf_quantize(std::span<const double> probabilities) {
  const std::size_t n = probabilities.size();
  if (n == 0 || n > kProbTotal) throw InvariantError("cdf_quantize: alphabet size must be in [1, 65536]");
  double sum = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvariantError("cdf_quantize: probabilities must be finite and >= 0");
    sum += p;
  }
  if (!(sum > 0.0)) throw InvariantError("cdf_quantize: probabilities sum to zero");

  std::vector<std::int64_t> freq(n);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    freq[i] = std::max<std::int64_t>(1, std::llround(probabilities[i] / sum * kProbTotal));
    total += freq[i];
  }
  std::int64_t diff = static_cast<std::int64_t>(kProbTotal) - total;
  while (diff != 0) {
    const auto largest = static_cast<std::size_t>(std::max_element(freq.begin(), freq.end()) - freq.begin());
    if (diff > 0) {
      freq[largest] += diff;
      diff = 0;
    } else {
      const std::int64_t take = std::min(-diff, freq[largest] - 1);
      freq[largest] -= take;
      diff += take;
    }
  }
  std::vector<std::uint32_t> cum(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + static_cast<std::uint32_t>(freq[i]);
  return CdfTable(std::move(cum));
}

void RangeEncoder::encode(const CdfTable& table, std::size_t symbol) {
  if (symbol >= table.size()) throw InvariantError("range encoder: symbol outside the table");
  encode(table.low(symbol), table.freq(symbol), symbol + 1 == table.size());
}

void RangeEncoder::encode(std::uint32_t low, std::uint32_t freq, bool last) {
  const std::uint32_t r = range_ >> kProbBits;
  low_ += static_cast<std::uint64_t>(r) * low;
  range_ = last ? range_ - r * low : r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xff000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(temp + carry));
      temp = 0xff;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00ffffffu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  auto out = std::move(out_);
  *this = RangeEncoder{};
  return out;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : in_(bytes) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) throw FormatError("range decoder: truncated payload");
  return in_[pos_++];
}

std::size_t RangeDecoder::decode(const CdfTable& table) {
  const std::uint32_t r = range_ >> kProbBits;
  const std::uint32_t target = std::min<std::uint32_t>(code_ / r, kProbTotal - 1);
  const std::size_t s = table.find(target);
  const std::uint32_t low = table.low(s);
  code_ -= r * low;
  range_ = (s + 1 == table.size()) ? range_ - r * low : r * table.freq(s);
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return s;
}

std::vector<std::uint8_t> encode_symbols(std::span<const std::size_t> symbols, std::span<const CdfTable> tables) {
  if (symbols.size() != tables.size()) throw InvariantError("encode_symbols: one table per symbol required");
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode(tables[i], symbols[i]);
  return enc.finish();
}

std::vector<std::size_t> decode_symbols(std::span<const std::uint8_t> bytes, std::span<const CdfTable> tables) {
  RangeDecoder dec(bytes);
  std::vector<std::size_t> out;
  out.reserve(tables.size());
  for (const auto& t : tables) out.push_back(dec.decode(t));
  return out;
}

}  // namespace pgs
