#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "icnr/bytes.hpp"

namespace icnr {

// MSB-first bit sink.
class BitWriter {
 public:
  void put(std::uint32_t code, int len) {
    for (int i = len - 1; i >= 0; --i) bit((code >> i) & 1u);
  }
  void bit(unsigned b) {
    if (used_ % 8 == 0) bytes_.push_back(0);
    if (b) bytes_.back() |= std::uint8_t(0x80u >> (used_ % 8));
    ++used_;
  }
  // Exp-Golomb order 0.
  void exp_golomb(std::uint32_t v) {
    const std::uint64_t x = std::uint64_t(v) + 1;
    int n = 0;
    while ((x >> (n + 1)) != 0) ++n;
    for (int i = 0; i < n; ++i) bit(0);
    for (int i = n; i >= 0; --i) bit(unsigned((x >> i) & 1u));
  }
  std::uint64_t bit_count() const { return used_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t used_ = 0;
};

// Bounds-checked MSB-first bit source; running out raises CorruptStream.
class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}
  unsigned bit();
  std::uint32_t get(int len);
  std::uint32_t exp_golomb();
  std::uint64_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::uint64_t pos_ = 0;
};

struct HuffmanTable {
  std::uint32_t alphabet = 0;
  std::vector<std::uint8_t> lengths;  // per symbol, 0 when unused

  // Sum of 2^-len over used symbols.
  double kraft_sum() const;
};

struct HuffmanCode {
  HuffmanTable table;
  std::vector<std::uint8_t> stream;
  std::uint64_t bit_count = 0;
};

constexpr int kMaxCodeLength = 24;

// Code lengths of a length-limited Huffman code for the given frequencies.
std::vector<std::uint8_t> huffman_lengths(std::span<const std::uint64_t> freq, int max_len = kMaxCodeLength);

HuffmanCode huffman_encode(std::span<const std::uint32_t> symbols, std::uint32_t alphabet);
std::vector<std::uint32_t> huffman_decode(const HuffmanTable& table, std::span<const std::uint8_t> stream,
                                          std::size_t n);

// Compact table: alphabet, used-symbol span, then delta-coded lengths.
void write_table(ByteWriter& out, const HuffmanTable& table);
HuffmanTable read_table(ByteReader& in);

}  // namespace icnr
