#include "icnr/artifact.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <variant>

#include "icnr/error.hpp"
#include "icnr/huffman.hpp"
#include "icnr/image_codec.hpp"

namespace icnr {

namespace {

constexpr char kMagic[4] = {'I', 'C', 'N', 'R'};

enum class Section : std::uint8_t { Mask = 1, Mean = 2, Chunk = 3 };

using Value = std::variant<std::int64_t, double, std::string>;

class KvWriter {
 public:
  void put(const std::string& key, Value v) { entries_.emplace_back(key, std::move(v)); }
  std::vector<std::uint8_t> bytes() const {
    ByteWriter w;
    w.varint(entries_.size());
    for (const auto& [k, v] : entries_) {
      w.varint(k.size());
      w.str(k);
      w.u8(std::uint8_t(v.index()));
      if (const auto* i = std::get_if<std::int64_t>(&v)) w.svarint(*i);
      else if (const auto* d = std::get_if<double>(&v)) w.f64(*d);
      else {
        const auto& s = std::get<std::string>(v);
        w.varint(s.size());
        w.str(s);
      }
    }
    return w.take();
  }

 private:
  std::vector<std::pair<std::string, Value>> entries_;
};

class KvReader {
 public:
  explicit KvReader(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const std::uint64_t n = r.varint();
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string key = r.str(std::size_t(r.varint()));
      const std::uint8_t tag = r.u8();
      if (tag == 0) map_[key] = r.svarint();
      else if (tag == 1) map_[key] = r.f64();
      else if (tag == 2) map_[key] = r.str(std::size_t(r.varint()));
      else throw Error(ErrorKind::CorruptStream, "unknown header value tag");
    }
    if (!r.done()) throw Error(ErrorKind::CorruptStream, "trailing bytes in header");
  }
  const Value& at(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) throw Error(ErrorKind::CorruptStream, "header lacks key " + key);
    return it->second;
  }
  std::int64_t i(const std::string& key) const {
    const auto* v = std::get_if<std::int64_t>(&at(key));
    if (!v) throw Error(ErrorKind::CorruptStream, "header key " + key + " has the wrong type");
    return *v;
  }
  int small(const std::string& key, std::int64_t lo, std::int64_t hi) const {
    const std::int64_t v = i(key);
    if (v < lo || v > hi) throw Error(ErrorKind::CorruptStream, "header key " + key + " out of range");
    return int(v);
  }
  double d(const std::string& key) const {
    const auto* v = std::get_if<double>(&at(key));
    if (!v) throw Error(ErrorKind::CorruptStream, "header key " + key + " has the wrong type");
    return *v;
  }
  std::string s(const std::string& key) const {
    const auto* v = std::get_if<std::string>(&at(key));
    if (!v) throw Error(ErrorKind::CorruptStream, "header key " + key + " has the wrong type");
    return *v;
  }

 private:
  std::map<std::string, Value> map_;
};

enum class TensorMode : std::uint8_t { Raw = 0, Huffman = 1 };

std::vector<std::uint8_t> pack_raw(const QuantizedTensor& q) {
  BitWriter bw;
  for (std::uint32_t s : q.symbols) bw.put(s, q.bits);
  return bw.take();
}

}  // namespace

void CodecOptions::validate() const {
  if (bits < 1 || bits > 16) throw Error(ErrorKind::Config, "codec.bits must lie in [1, 16]");
  if (mean_quality < 1 || mean_quality > 100) throw Error(ErrorKind::Config, "codec.mean_quality must lie in [1, 100]");
}

RatioReport compression_ratio(const Dims4& dims, DType source_dtype, std::uint64_t artifact_bytes) {
  RatioReport r;
  r.original_bytes = std::uint64_t(dims.count()) * dtype_bytes(source_dtype);
  r.artifact_bytes = artifact_bytes;
  r.ratio = artifact_bytes ? double(r.original_bytes) / double(artifact_bytes) : 0.0;
  return r;
}

std::vector<std::uint8_t> encode_mask_rle(const Mask3D& mask) {
  ByteWriter w;
  std::uint8_t current = 0;
  std::uint64_t run = 0;
  std::vector<std::uint64_t> runs;
  for (std::uint8_t v : mask.data()) {
    const std::uint8_t b = v ? 1 : 0;
    if (b != current) {
      runs.push_back(run);
      run = 0;
      current = b;
    }
    ++run;
  }
  runs.push_back(run);
  w.varint(runs.size());
  for (std::uint64_t r : runs) w.varint(r);
  return w.take();
}

Mask3D decode_mask_rle(std::span<const std::uint8_t> bytes, Dims3 dims) {
  ByteReader r(bytes);
  std::vector<std::uint8_t> data;
  data.reserve(dims.count());
  const std::uint64_t n = r.varint();
  std::uint8_t v = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t len = r.varint();
    if (len > dims.count() - data.size()) throw Error(ErrorKind::CorruptStream, "mask runs exceed the volume");
    data.insert(data.end(), std::size_t(len), v);
    v ^= 1;
  }
  if (data.size() != dims.count() || !r.done()) throw Error(ErrorKind::CorruptStream, "mask runs do not cover the volume");
  return Mask3D(dims, std::move(data));
}

void write_tensor(ByteWriter& out, const QuantizedTensor& q) {
  const std::vector<std::uint8_t> raw = pack_raw(q);
  const HuffmanCode code = huffman_encode(q.symbols, 1u << q.bits);
  ByteWriter huff;
  write_table(huff, code.table);
  huff.varint(code.stream.size());
  huff.bytes(code.stream);

  out.u8(std::uint8_t(q.bits));
  out.f32(q.scale);
  out.f32(q.offset);
  out.varint(q.symbols.size());
  if (huff.size() < raw.size()) {
    out.u8(std::uint8_t(TensorMode::Huffman));
    out.bytes(huff.buffer());
  } else {
    out.u8(std::uint8_t(TensorMode::Raw));
    out.bytes(raw);
  }
}

QuantizedTensor read_tensor(ByteReader& in, std::size_t expected_size) {
  QuantizedTensor q;
  q.bits = in.u8();
  if (q.bits < 1 || q.bits > 16) throw Error(ErrorKind::CorruptStream, "tensor bit width out of range");
  q.scale = in.f32();
  q.offset = in.f32();
  const std::uint64_t n = in.varint();
  if (n != expected_size) throw Error(ErrorKind::CorruptStream, "tensor size differs from the model layout");
  q.shape = {int(n)};
  const std::uint8_t mode = in.u8();
  if (mode == std::uint8_t(TensorMode::Raw)) {
    const std::size_t nbytes = std::size_t((n * std::uint64_t(q.bits) + 7) / 8);
    BitReader br(in.bytes(nbytes));
    q.symbols.resize(std::size_t(n));
    for (auto& s : q.symbols) s = br.get(q.bits);
  } else if (mode == std::uint8_t(TensorMode::Huffman)) {
    const HuffmanTable table = read_table(in);
    if (table.alphabet != (1u << q.bits)) throw Error(ErrorKind::CorruptStream, "table alphabet mismatch");
    const std::uint64_t len = in.varint();
    if (len > in.remaining()) throw Error(ErrorKind::CorruptStream, "tensor stream overruns section");
    q.symbols = huffman_decode(table, in.bytes(std::size_t(len)), std::size_t(n));
  } else {
    throw Error(ErrorKind::CorruptStream, "unknown tensor coding mode");
  }
  if (!std::isfinite(q.scale) || !std::isfinite(q.offset)) throw Error(ErrorKind::CorruptStream, "non-finite tensor scale");
  return q;
}

std::vector<std::uint8_t> pack(const Artifact& a) {
  a.codec.validate();
  if (a.chunks.empty()) throw Error(ErrorKind::Config, "artifact has no models");
  KvWriter kv;
  kv.put("dims.w", std::int64_t(a.dims.w));
  kv.put("dims.h", std::int64_t(a.dims.h));
  kv.put("dims.d", std::int64_t(a.dims.d));
  kv.put("dims.t", std::int64_t(a.dims.t));
  kv.put("source_dtype", std::int64_t(a.source_dtype));
  kv.put("scale.offset", a.voxel_scale.offset);
  kv.put("scale.gain", a.voxel_scale.gain);
  kv.put("model.K", std::int64_t(a.model.K));
  kv.put("model.embed_freqs", std::int64_t(a.model.embed_freqs));
  kv.put("model.mlp_layers", std::int64_t(a.model.mlp_layers));
  kv.put("model.mlp_width", std::int64_t(a.model.mlp_width));
  kv.put("model.feat_channels", std::int64_t(a.model.feat_channels));
  kv.put("model.fusion_levels", std::int64_t(a.model.fusion_levels));
  kv.put("model.fusion_width", std::int64_t(a.model.fusion_width));
  kv.put("model.fusion", std::int64_t(a.model.fusion));
  kv.put("model.encoder_activation", std::int64_t(a.model.encoder_activation));
  kv.put("train.digest", a.train_digest);
  kv.put("codec.bits", std::int64_t(a.codec.bits));
  kv.put("codec.mean_lossless", std::int64_t(a.codec.mean_lossless));
  kv.put("codec.mean_quality", std::int64_t(a.codec.mean_quality));
  kv.put("chunks", std::int64_t(a.chunks.size()));
  const std::vector<std::uint8_t> header = kv.bytes();

  ByteWriter w;
  w.str(std::string_view(kMagic, 4));
  w.u16(kArtifactVersion);
  w.varint(header.size());
  w.bytes(header);

  auto section = [&w](Section type, const std::vector<std::uint8_t>& body) {
    w.u8(std::uint8_t(type));
    w.varint(body.size());
    w.bytes(body);
  };
  section(Section::Mask, encode_mask_rle(a.mask));
  section(Section::Mean, encode_mean_frame(a.mean, a.codec.mean_quality, a.codec.mean_lossless));
  for (const ChunkModel& c : a.chunks) {
    ByteWriter body;
    body.varint(std::uint64_t(c.t0));
    body.varint(std::uint64_t(c.t1));
    body.f64(c.norm.offset);
    body.f64(c.norm.scale);
    const Eigen::VectorXd& p = c.model.parameters();
    body.varint(c.model.tensors().size());
    for (const TensorInfo& t : c.model.tensors()) {
      write_tensor(body, quantize_tensor(std::span<const double>(p.data() + t.offset, std::size_t(t.size)), a.codec.bits,
                                         t.shape));
    }
    section(Section::Chunk, body.take());
  }
  w.u64(fnv1a64(w.buffer()));
  return w.take();
}

Artifact unpack(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 2 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::CorruptStream, "not an artifact (bad magic)");
  }
  ByteReader r(bytes.first(bytes.size() - 8));
  r.bytes(4);
  const std::uint16_t version = r.u16();
  if (version != kArtifactVersion) {
    throw Error(ErrorKind::VersionUnsupported, "artifact version " + std::to_string(version) + " is not supported");
  }
  ByteReader tail(bytes.last(8));
  if (tail.u64() != fnv1a64(bytes.first(bytes.size() - 8))) {
    throw Error(ErrorKind::ChecksumMismatch, "artifact checksum does not match its contents");
  }

  const std::uint64_t header_len = r.varint();
  if (header_len > r.remaining()) throw Error(ErrorKind::CorruptStream, "header overruns file");
  const KvReader kv(r.bytes(std::size_t(header_len)));

  Artifact a;
  a.dims = {kv.small("dims.w", 1, 1 << 20), kv.small("dims.h", 1, 1 << 20), kv.small("dims.d", 1, 1 << 20),
            kv.small("dims.t", 1, 1 << 24)};
  a.source_dtype = DType(kv.small("source_dtype", 0, 3));
  a.voxel_scale = {kv.d("scale.offset"), kv.d("scale.gain")};
  a.model.K = kv.small("model.K", 1, 4096);
  a.model.embed_freqs = kv.small("model.embed_freqs", 1, 64);
  a.model.mlp_layers = kv.small("model.mlp_layers", 1, 256);
  a.model.mlp_width = kv.small("model.mlp_width", 1, 1 << 16);
  a.model.feat_channels = kv.small("model.feat_channels", 1, 1 << 12);
  a.model.fusion_levels = kv.small("model.fusion_levels", 1, 16);
  a.model.fusion_width = kv.small("model.fusion_width", 1, 1 << 12);
  a.model.fusion = kv.small("model.fusion", 0, 1) != 0;
  a.model.encoder_activation = nn::Activation(kv.small("model.encoder_activation", 0, 1));
  a.train_digest = kv.s("train.digest");
  a.codec.bits = kv.small("codec.bits", 1, 16);
  a.codec.mean_lossless = kv.small("codec.mean_lossless", 0, 1) != 0;
  a.codec.mean_quality = kv.small("codec.mean_quality", 1, 100);
  const int n_chunks = kv.small("chunks", 1, 1 << 20);

  auto section = [&r](Section expected) {
    const std::uint8_t type = r.u8();
    if (type != std::uint8_t(expected)) throw Error(ErrorKind::CorruptStream, "unexpected section type");
    const std::uint64_t len = r.varint();
    if (len > r.remaining()) throw Error(ErrorKind::CorruptStream, "section overruns file");
    return r.bytes(std::size_t(len));
  };
  a.mask = decode_mask_rle(section(Section::Mask), a.dims.spatial());
  a.mean = decode_mean_frame(section(Section::Mean));
  if (a.mean.dims != a.dims.spatial()) throw Error(ErrorKind::CorruptStream, "mean frame dims differ from header");

  int expected_t0 = 0;
  for (int c = 0; c < n_chunks; ++c) {
    ByteReader body(section(Section::Chunk));
    const int t0 = int(body.varint()), t1 = int(body.varint());
    if (t0 != expected_t0 || t1 <= t0 || t1 > a.dims.t) throw Error(ErrorKind::CorruptStream, "bad chunk range");
    expected_t0 = t1;
    Normalization norm{body.f64(), body.f64()};
    ModelConfig mc = a.model;
    mc.T = t1 - t0;
    InrModel model(mc, 0);
    if (body.varint() != model.tensors().size()) throw Error(ErrorKind::CorruptStream, "tensor count mismatch");
    Eigen::VectorXd& p = model.parameters();
    for (const TensorInfo& t : model.tensors()) {
      const QuantizedTensor q = read_tensor(body, std::size_t(t.size));
      for (Eigen::Index i = 0; i < t.size; ++i) p(t.offset + i) = q.value(std::size_t(i));
    }
    if (!body.done()) throw Error(ErrorKind::CorruptStream, "trailing bytes in chunk section");
    a.chunks.push_back({t0, t1, norm, std::move(model)});
  }
  if (expected_t0 != a.dims.t) throw Error(ErrorKind::CorruptStream, "chunks do not cover the series");
  if (!r.done()) throw Error(ErrorKind::CorruptStream, "trailing bytes after sections");
  return a;
}

}  // namespace icnr
