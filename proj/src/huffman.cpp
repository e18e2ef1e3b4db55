#include "icnr/huffman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "icnr/error.hpp"

namespace icnr {

unsigned BitReader::bit() {
  if (pos_ >= std::uint64_t(data_.size()) * 8) throw Error(ErrorKind::CorruptStream, "bitstream ended early");
  const unsigned b = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
  ++pos_;
  return b;
}

std::uint32_t BitReader::get(int len) {
  std::uint32_t v = 0;
  for (int i = 0; i < len; ++i) v = (v << 1) | bit();
  return v;
}

std::uint32_t BitReader::exp_golomb() {
  int n = 0;
  while (bit() == 0) {
    if (++n > 32) throw Error(ErrorKind::CorruptStream, "Exp-Golomb prefix too long");
  }
  std::uint64_t x = 1;
  for (int i = 0; i < n; ++i) x = (x << 1) | bit();
  return std::uint32_t(x - 1);
}

double HuffmanTable::kraft_sum() const {
  double s = 0.0;
  for (std::uint8_t l : lengths)
    if (l) s += std::ldexp(1.0, -int(l));
  return s;
}

namespace {

std::vector<std::uint8_t> plain_lengths(std::span<const std::uint64_t> freq) {
  struct Node {
    std::uint64_t weight;
    int id;
  };
  auto heavier = [](const Node& a, const Node& b) { return a.weight != b.weight ? a.weight > b.weight : a.id > b.id; };
  std::priority_queue<Node, std::vector<Node>, decltype(heavier)> heap(heavier);
  std::vector<int> parent;
  std::vector<int> leaf_node(freq.size(), -1);
  for (std::size_t s = 0; s < freq.size(); ++s) {
    if (!freq[s]) continue;
    leaf_node[s] = int(parent.size());
    heap.push({freq[s], int(parent.size())});
    parent.push_back(-1);
  }
  std::vector<std::uint8_t> lengths(freq.size(), 0);
  if (parent.empty()) return lengths;
  if (parent.size() == 1) {
    for (std::size_t s = 0; s < freq.size(); ++s)
      if (freq[s]) lengths[s] = 1;
    return lengths;
  }
  while (heap.size() > 1) {
    const Node a = heap.top();
    heap.pop();
    const Node b = heap.top();
    heap.pop();
    const int id = int(parent.size());
    parent.push_back(-1);
    parent[std::size_t(a.id)] = id;
    parent[std::size_t(b.id)] = id;
    heap.push({a.weight + b.weight, id});
  }
  for (std::size_t s = 0; s < freq.size(); ++s) {
    if (leaf_node[s] < 0) continue;
    int depth = 0;
    for (int n = leaf_node[s]; parent[std::size_t(n)] >= 0; n = parent[std::size_t(n)]) ++depth;
    lengths[s] = std::uint8_t(std::min(depth, 255));
  }
  return lengths;
}

// Canonical codes: symbols ordered by (length, symbol).
std::vector<std::uint32_t> canonical_codes(const std::vector<std::uint8_t>& lengths) {
  std::vector<std::uint32_t> codes(lengths.size(), 0);
  std::vector<std::uint32_t> count(kMaxCodeLength + 2, 0), next(kMaxCodeLength + 2, 0);
  for (std::uint8_t l : lengths)
    if (l) ++count[l];
  std::uint32_t code = 0;
  for (int l = 1; l <= kMaxCodeLength; ++l) {
    code = (code + count[std::size_t(l - 1)]) << 1;
    next[std::size_t(l)] = code;
  }
  for (std::size_t s = 0; s < lengths.size(); ++s)
    if (lengths[s]) codes[s] = next[lengths[s]]++;
  return codes;
}

}  // namespace

std::vector<std::uint8_t> huffman_lengths(std::span<const std::uint64_t> freq, int max_len) {
  std::vector<std::uint64_t> f(freq.begin(), freq.end());
  for (;;) {
    std::vector<std::uint8_t> lengths = plain_lengths(f);
    if (lengths.empty() || *std::max_element(lengths.begin(), lengths.end()) <= max_len) return lengths;
    for (auto& v : f)
      if (v) v = (v + 1) / 2;
  }
}

HuffmanCode huffman_encode(std::span<const std::uint32_t> symbols, std::uint32_t alphabet) {
  std::vector<std::uint64_t> freq(alphabet, 0);
  for (std::uint32_t s : symbols) {
    if (s >= alphabet) throw Error(ErrorKind::CorruptStream, "symbol outside the alphabet");
    ++freq[s];
  }
  HuffmanCode out;
  out.table.alphabet = alphabet;
  out.table.lengths = huffman_lengths(freq);
  const std::vector<std::uint32_t> codes = canonical_codes(out.table.lengths);
  BitWriter bw;
  for (std::uint32_t s : symbols) bw.put(codes[s], out.table.lengths[s]);
  out.bit_count = bw.bit_count();
  out.stream = bw.take();
  return out;
}

std::vector<std::uint32_t> huffman_decode(const HuffmanTable& table, std::span<const std::uint8_t> stream,
                                          std::size_t n) {
  std::vector<std::uint32_t> out;
  if (n == 0) return out;
  if (table.lengths.size() != table.alphabet) throw Error(ErrorKind::CorruptStream, "table size differs from alphabet");
  if (table.kraft_sum() > 1.0) throw Error(ErrorKind::CorruptStream, "code lengths violate the Kraft inequality");

  std::vector<std::uint32_t> count(kMaxCodeLength + 1, 0);
  std::vector<std::uint32_t> sorted;
  for (int l = 1; l <= kMaxCodeLength; ++l)
    for (std::uint32_t s = 0; s < table.alphabet; ++s)
      if (table.lengths[s] == l) {
        ++count[std::size_t(l)];
        sorted.push_back(s);
      }
  for (std::uint8_t l : table.lengths)
    if (l > kMaxCodeLength) throw Error(ErrorKind::CorruptStream, "code length above the limit");
  if (sorted.empty()) throw Error(ErrorKind::CorruptStream, "empty code table for a non-empty stream");

  BitReader br(stream);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t code = 0, first = 0, index = 0;
    bool found = false;
    for (int l = 1; l <= kMaxCodeLength; ++l) {
      code |= br.bit();
      const std::uint32_t c = count[std::size_t(l)];
      if (code - first < c) {
        out.push_back(sorted[index + (code - first)]);
        found = true;
        break;
      }
      index += c;
      first = (first + c) << 1;
      code <<= 1;
    }
    if (!found) throw Error(ErrorKind::CorruptStream, "bit pattern matches no code");
  }
  return out;
}

void write_table(ByteWriter& out, const HuffmanTable& table) {
  out.varint(table.alphabet);
  std::uint32_t lo = table.alphabet, hi = 0;
  for (std::uint32_t s = 0; s < table.alphabet; ++s)
    if (table.lengths[s]) {
      lo = std::min(lo, s);
      hi = s;
    }
  if (lo > hi) {
    out.varint(0);
    return;
  }
  out.varint(std::uint64_t(hi - lo) + 1);
  out.varint(lo);
  BitWriter bw;
  int prev = 0;
  for (std::uint32_t s = lo; s <= hi; ++s) {
    const int d = int(table.lengths[s]) - prev;
    bw.exp_golomb(std::uint32_t(d >= 0 ? 2 * d : -2 * d - 1));
    prev = table.lengths[s];
  }
  const std::vector<std::uint8_t> bits = bw.take();
  out.varint(bits.size());
  out.bytes(bits);
}

HuffmanTable read_table(ByteReader& in) {
  HuffmanTable t;
  const std::uint64_t alphabet = in.varint();
  if (alphabet > (1u << 16)) throw Error(ErrorKind::CorruptStream, "alphabet too large");
  t.alphabet = std::uint32_t(alphabet);
  t.lengths.assign(t.alphabet, 0);
  const std::uint64_t span = in.varint();
  if (span == 0) return t;
  const std::uint64_t lo = in.varint();
  if (lo + span > alphabet) throw Error(ErrorKind::CorruptStream, "table span exceeds alphabet");
  const std::uint64_t nbytes = in.varint();
  if (nbytes > in.remaining()) throw Error(ErrorKind::CorruptStream, "table bits overrun the section");
  BitReader br(in.bytes(std::size_t(nbytes)));
  int prev = 0;
  for (std::uint64_t i = 0; i < span; ++i) {
    const std::uint32_t z = br.exp_golomb();
    const int d = (z & 1u) ? -int((z + 1) / 2) : int(z / 2);
    const int len = prev + d;
    if (len < 0 || len > kMaxCodeLength) throw Error(ErrorKind::CorruptStream, "invalid code length");
    t.lengths[std::size_t(lo + i)] = std::uint8_t(len);
    prev = len;
  }
  return t;
}

}  // namespace icnr
