#include "doctest.h"

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "icnr/artifact.hpp"
#include "icnr/error.hpp"
#include "icnr/huffman.hpp"
#include "icnr/image_codec.hpp"
#include "icnr/pipeline.hpp"
#include "icnr/quantize.hpp"

using namespace icnr;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;  // sentinel: nothing thrown
}

ModelConfig small_model(int T = 12) {
  ModelConfig c;
  c.K = 3;
  c.T = T;
  c.embed_freqs = 2;
  c.mlp_layers = 2;
  c.mlp_width = 6;
  c.feat_channels = 2;
  c.fusion_levels = 2;
  c.fusion_width = 3;
  c.zero_init_output = false;
  return c;
}

Artifact make_artifact(std::uint64_t seed, int bits = 8) {
  Artifact a;
  a.dims = {5, 4, 3, 12};
  a.source_dtype = DType::Int16;
  a.model = small_model();
  a.train_digest = "00112233aabbccdd";
  a.codec.bits = bits;
  Rng rng(seed);
  std::vector<std::uint8_t> m(a.dims.voxels());
  for (auto& b : m) b = rng.uniform() < 0.6;
  m[0] = 1;
  a.mask = Mask3D(a.dims.spatial(), m);
  a.mean.dims = a.dims.spatial();
  for (std::size_t i = 0; i < a.dims.voxels(); ++i) a.mean.data.push_back(float(100 + 10 * rng.normal()));
  InrModel model(a.model, seed);
  a.chunks.push_back(ChunkModel{0, 12, Normalization{0.5, 2.0}, model});
  return a;
}

double entropy_bits(const std::vector<std::uint32_t>& s) {
  std::map<std::uint32_t, double> f;
  for (auto v : s) f[v] += 1;
  double h = 0;
  for (auto& [k, c] : f) h -= c / double(s.size()) * std::log2(c / double(s.size()));
  return h;
}

}  // namespace

TEST_CASE("quantize_tensor") {
  SUBCASE("constant") {
    const std::vector<double> v{5, 5, 5};
    const QuantizedTensor q = quantize_tensor(v, 8);
    CHECK(q.symbols == std::vector<std::uint32_t>{0, 0, 0});
    CHECK(q.offset == 5.0f);
    CHECK(q.scale == 1.0f);
    CHECK(q.dequantize() == v);
  }
  SUBCASE("one bit") {
    const std::vector<double> v{0, 1};
    const QuantizedTensor q = quantize_tensor(v, 1);
    CHECK(q.symbols == std::vector<std::uint32_t>{0, 1});
    CHECK(q.dequantize() == v);
  }
  SUBCASE("error bound on gaussian samples") {
    Rng rng(1);
    std::vector<double> v(10000);
    for (double& x : v) x = rng.normal() * 0.3 + 0.1;
    for (int bits : {2, 4, 8, 12, 16}) {
      const QuantizedTensor q = quantize_tensor(v, bits);
      const auto d = q.dequantize();
      double worst = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(q.symbols[i] < (1u << bits));
        worst = std::max(worst, std::abs(d[i] - v[i]));
      }
      CHECK(worst <= double(q.scale) / 2 * (1 + 1e-9));
    }
  }
  SUBCASE("guards") {
    const std::vector<double> nan{1.0, std::nan("")};
    CHECK(kind_of([&] { quantize_tensor(nan, 8); }) == ErrorKind::NonFiniteInput);
    const std::vector<double> ok{1.0};
    CHECK_THROWS_AS(quantize_tensor(ok, 0), Error);
    CHECK_THROWS_AS(quantize_tensor(ok, 17), Error);
  }
}

TEST_CASE("huffman lengths by hand") {
  const std::vector<std::uint64_t> freq{2, 1, 1};
  const auto len = huffman_lengths(freq);
  CHECK(len == std::vector<std::uint8_t>{1, 2, 2});
  std::vector<std::uint32_t> sym{0, 0, 1, 2, 0, 0, 1, 2};
  const HuffmanCode c = huffman_encode(sym, 3);
  CHECK(double(c.bit_count) / double(sym.size()) == 1.5);
  CHECK(huffman_decode(c.table, c.stream, sym.size()) == sym);
}

TEST_CASE("huffman degenerate and empty") {
  const std::vector<std::uint32_t> same(100, 7);
  const HuffmanCode c = huffman_encode(same, 256);
  CHECK(c.stream.size() <= 13);
  CHECK(c.table.lengths[7] == 1);
  CHECK(huffman_decode(c.table, c.stream, 100) == same);
  const HuffmanCode e = huffman_encode({}, 16);
  CHECK(huffman_decode(e.table, e.stream, 0).empty());
}

TEST_CASE("huffman roundtrip, Kraft and size bound on random arrays") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t alphabet = 1u + std::uint32_t(rng.below(300));
    const std::size_t n = std::size_t(rng.below(400));
    std::vector<std::uint32_t> s(n);
    const double skew = rng.uniform(0.2, 3.0);
    for (auto& v : s) v = std::min<std::uint32_t>(alphabet - 1, std::uint32_t(std::pow(rng.uniform(), skew) * alphabet));
    const HuffmanCode c = huffman_encode(s, alphabet);
    CHECK(c.table.kraft_sum() <= 1.0 + 1e-12);
    REQUIRE(huffman_decode(c.table, c.stream, n) == s);
    if (n > 0) CHECK(double(c.bit_count) <= std::ceil(double(n) * (entropy_bits(s) + 1)));
    ByteWriter w;
    write_table(w, c.table);
    ByteReader r(w.buffer());
    const HuffmanTable t = read_table(r);
    CHECK(t.lengths == c.table.lengths);
    CHECK(r.done());
  }
}

TEST_CASE("huffman length limit") {
  // Fibonacci frequencies force a deep tree.
  std::vector<std::uint64_t> f{1, 1};
  while (f.size() < 40) f.push_back(f[f.size() - 1] + f[f.size() - 2]);
  const auto len = huffman_lengths(f);
  double kraft = 0;
  for (auto l : len) {
    CHECK(l <= kMaxCodeLength);
    CHECK(l >= 1);
    kraft += std::ldexp(1.0, -int(l));
  }
  CHECK(kraft <= 1.0);
}

TEST_CASE("huffman corrupt streams") {
  std::vector<std::uint32_t> s;
  Rng rng(9);
  for (int i = 0; i < 500; ++i) s.push_back(std::uint32_t(rng.below(20)));
  const HuffmanCode c = huffman_encode(s, 20);
  auto truncated = c.stream;
  truncated.resize(truncated.size() / 2);
  CHECK(kind_of([&] { huffman_decode(c.table, truncated, s.size()); }) == ErrorKind::CorruptStream);
  // Adversarial bits: either a clean error or exactly n symbols.
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint8_t> junk(1 + rng.below(40));
    for (auto& b : junk) b = std::uint8_t(rng.below(256));
    const std::size_t n = std::size_t(rng.below(100));
    try {
      const auto out = huffman_decode(c.table, junk, n);
      CHECK(out.size() == n);
      for (auto v : out) CHECK(v < 20);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::CorruptStream);
    }
  }
  // Over-full table is rejected.
  HuffmanTable bad;
  bad.alphabet = 3;
  bad.lengths = {1, 1, 1};
  CHECK(kind_of([&] { huffman_decode(bad, c.stream, 3); }) == ErrorKind::CorruptStream);
}

TEST_CASE("png and jpeg in memory") {
  Gray8 img{7, 5, {}};
  for (int i = 0; i < 35; ++i) img.pixels.push_back(std::uint8_t(i * 7));
  const Gray8 back = decode_png(encode_png(img));
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.pixels == img.pixels);
  const Gray8 j = decode_jpeg(encode_jpeg(img, 95));
  CHECK(j.width == 7);
  CHECK(j.height == 5);
  CHECK_THROWS_AS(decode_png(std::vector<std::uint8_t>{1, 2, 3}), Error);
  CHECK_THROWS_AS(decode_jpeg(std::vector<std::uint8_t>{1, 2, 3}), Error);
}

TEST_CASE("mean frame codec") {
  MeanFrame m;
  m.dims = {9, 6, 4};
  Rng rng(2);
  for (std::size_t i = 0; i < m.dims.count(); ++i) m.data.push_back(float(50 + 30 * std::sin(0.3 * double(i)) + rng.normal()));
  SUBCASE("lossless bound per slice") {
    const MeanFrame back = decode_mean_frame(encode_mean_frame(m, 90, true));
    REQUIRE(back.dims == m.dims);
    for (int z = 0; z < m.dims.d; ++z) {
      float lo = 1e30f, hi = -1e30f;
      for (int y = 0; y < m.dims.h; ++y)
        for (int x = 0; x < m.dims.w; ++x) lo = std::min(lo, m.at(x, y, z)), hi = std::max(hi, m.at(x, y, z));
      for (int y = 0; y < m.dims.h; ++y)
        for (int x = 0; x < m.dims.w; ++x)
          CHECK(std::abs(back.at(x, y, z) - m.at(x, y, z)) <= (hi - lo) / 510.0 * (1 + 1e-5) + 1e-6);
    }
  }
  SUBCASE("constant frame exact") {
    MeanFrame c;
    c.dims = {4, 4, 2};
    c.data.assign(32, 3.25f);
    CHECK(decode_mean_frame(encode_mean_frame(c, 90, true)).data == c.data);
    CHECK(decode_mean_frame(encode_mean_frame(c, 50, false)).data == c.data);
  }
  SUBCASE("quality monotone") {
    CHECK(encode_mean_frame(m, 10, false).size() < encode_mean_frame(m, 90, false).size());
  }
}

TEST_CASE("mask rle") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Dims3 d{1 + int(rng.below(9)), 1 + int(rng.below(9)), 1 + int(rng.below(5))};
    std::vector<std::uint8_t> bits(d.count());
    const double p = rng.uniform();
    for (auto& b : bits) b = rng.uniform() < p;
    const Mask3D m(d, bits);
    const Mask3D back = decode_mask_rle(encode_mask_rle(m), d);
    CHECK(std::equal(back.data().begin(), back.data().end(), m.data().begin(), m.data().end()));
  }
}

TEST_CASE("pack/unpack restores dequantized parameters exactly") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Artifact a = make_artifact(seed, int(2 + seed % 12));
    const auto bytes = pack(a);
    const Artifact b = unpack(bytes);
    CHECK(b.dims == a.dims);
    CHECK(b.source_dtype == a.source_dtype);
    CHECK(b.train_digest == a.train_digest);
    CHECK(b.codec.bits == a.codec.bits);
    CHECK(std::equal(b.mask.data().begin(), b.mask.data().end(), a.mask.data().begin(), a.mask.data().end()));
    REQUIRE(b.chunks.size() == 1);
    CHECK(b.chunks[0].norm.offset == 0.5);
    CHECK(b.chunks[0].norm.scale == 2.0);
    const InrModel& ma = a.chunks[0].model;
    const InrModel& mb = b.chunks[0].model;
    REQUIRE(mb.parameter_count() == ma.parameter_count());
    for (const auto& t : ma.tensors()) {
      const auto q = quantize_tensor(std::span<const double>(ma.parameters().data() + t.offset, std::size_t(t.size)),
                                     a.codec.bits);
      const auto d = q.dequantize();
      for (Eigen::Index i = 0; i < t.size; ++i) CHECK(mb.parameters()(t.offset + i) == d[std::size_t(i)]);
    }
    CHECK(pack(b) == bytes);
  }
}

TEST_CASE("fewer bits give a smaller artifact") {
  std::size_t prev = SIZE_MAX;
  for (int bits : {12, 10, 8, 6, 4, 2}) {
    const std::size_t n = pack(make_artifact(3, bits)).size();
    CHECK(n < prev);
    prev = n;
  }
  const Artifact a = make_artifact(3, 8);
  CHECK(pack(a).size() < a.chunks[0].model.parameter_count() * 4);
}

TEST_CASE("unpack rejects damage") {
  const auto bytes = pack(make_artifact(2));
  auto flip = bytes;
  flip[bytes.size() / 2] ^= 0x10;
  CHECK(kind_of([&] { unpack(flip); }) == ErrorKind::ChecksumMismatch);
  auto sum = bytes;
  sum.back() ^= 1;
  CHECK(kind_of([&] { unpack(sum); }) == ErrorKind::ChecksumMismatch);
  auto ver = bytes;
  ver[4] = 9;
  CHECK(kind_of([&] { unpack(ver); }) == ErrorKind::VersionUnsupported);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(kind_of([&] { unpack(magic); }) == ErrorKind::CorruptStream);
  CHECK(kind_of([&] { unpack(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10)); }) != ErrorKind::Io);
}

TEST_CASE("compression ratio arithmetic") {
  const RatioReport r = compression_ratio({64, 64, 48, 100}, DType::Int16, 307200);
  CHECK(r.original_bytes == 39321600);
  CHECK(r.ratio == doctest::Approx(128.0));
  CHECK(compression_ratio({4, 4, 4, 4}, DType::Int16, 512).ratio == 1.0);
  CHECK(compression_ratio({4, 4, 4, 4}, DType::Float32, 256).ratio ==
        doctest::Approx(2 * compression_ratio({4, 4, 4, 4}, DType::Float32, 512).ratio));
}

TEST_CASE("decompress: deterministic, background constant, dims from header") {
  const Artifact a = make_artifact(6);
  const auto bytes = pack(a);
  const Volume4D v1 = decompress(bytes);
  const Volume4D v2 = decompress(bytes);
  CHECK(v1.dims() == a.dims);
  CHECK(std::equal(v1.data().begin(), v1.data().end(), v2.data().begin()));
  const Artifact b = unpack(bytes);
  for (int z = 0; z < a.dims.d; ++z)
    for (int y = 0; y < a.dims.h; ++y)
      for (int x = 0; x < a.dims.w; ++x) {
        if (a.mask.at(x, y, z)) continue;
        for (int t = 0; t < a.dims.t; ++t) CHECK(v1.at(x, y, z, t) == b.mean.at(x, y, z));
      }
}

TEST_CASE("block-average reference codec") {
  const Volume4D flat(Dims4{8, 8, 4, 16}, std::vector<float>(8 * 8 * 4 * 16, 2.5f));
  const BlockCodecResult r = block_average_codec(flat, 2, 4);
  for (float v : r.reconstruction.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-3));
  CHECK(r.bytes == std::uint64_t(4 * 4 * 2 * 4) * 2 + 16);
  const Volume4D noisy = testutil::random_volume({8, 8, 4, 16}, 3);
  CHECK(block_average_codec(noisy, 1, 1).bytes > block_average_codec(noisy, 2, 2).bytes);
}
