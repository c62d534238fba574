#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgs/error.hpp"

namespace pgs {

// Little-endian serialization helpers shared by every file format.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void tag(std::string_view magic) { buf_.insert(buf_.end(), magic.begin(), magic.end()); }

  std::size_t size() const { return buf_.size(); }
  const std::vector<std::uint8_t>& data() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  template <class T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data, std::string what = "stream")
      : data_(data), what_(std::move(what)) {}

  std::uint8_t u8() { return get_le<std::uint8_t>(); }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

  std::span<const std::uint8_t> bytes(std::size_t n) {
    require(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void expect_tag(std::string_view magic) {
    auto got = bytes(magic.size());
    if (std::memcmp(got.data(), magic.data(), magic.size()) != 0)
      throw FormatError(what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void require(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_));
  }

  template <class T>
  T get_le() {
    require(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

// MSB-first bit packing; the final byte is zero padded.
class BitWriter {
 public:
  void put(std::uint32_t value, int nbits) {
    for (int i = nbits - 1; i >= 0; --i) put_bit((value >> i) & 1u);
  }
  void put_bit(unsigned bit) {
    if (used_ == 0) buf_.push_back(0);
    if (bit) buf_.back() |= static_cast<std::uint8_t>(0x80u >> used_);
    used_ = (used_ + 1) & 7;
  }
  std::vector<std::uint8_t> take() {
    used_ = 0;
    return std::move(buf_);
  }

 private:
  std::vector<std::uint8_t> buf_;
  int used_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint32_t get(int nbits) {
    std::uint32_t v = 0;
    for (int i = 0; i < nbits; ++i) v = (v << 1) | get_bit();
    return v;
  }
  unsigned get_bit() {
    if (bit_ >= data_.size() * 8) throw FormatError("bit block: read past end");
    unsigned b = (data_[bit_ >> 3] >> (7 - (bit_ & 7))) & 1u;
    ++bit_;
    return b;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t bit_ = 0;
};

}  // namespace pgs
