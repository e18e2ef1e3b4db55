#include "icnr/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "icnr/bytes.hpp"
#include "icnr/error.hpp"

namespace icnr {

namespace {

constexpr char kRawMagic[4] = {'V', 'O', 'L', '4'};
constexpr std::uint8_t kRawVersion = 1;
constexpr std::size_t kRawHeader = 32;
constexpr std::size_t kNiftiHeader = 348;

void check_dims(const Dims4& dims, ErrorKind kind) {
  if (dims.w <= 0 || dims.h <= 0 || dims.d <= 0 || dims.t <= 0) {
    throw Error(kind, "dimensions must be positive");
  }
}

void check_finite(std::span<const float> data) {
  for (float v : data) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteInput, "volume contains NaN/Inf");
  }
}

template <typename T>
T saturate_round(double v) {
  const double lo = double(std::numeric_limits<T>::lowest());
  const double hi = double(std::numeric_limits<T>::max());
  return T(std::clamp(std::nearbyint(v), lo, hi));
}

std::vector<std::uint8_t> encode_rawbin(Dims4 dims, DType dtype, std::span<const double> values) {
  ByteWriter w;
  w.str(std::string_view(kRawMagic, 4));
  w.u8(kRawVersion);
  w.u8(std::uint8_t(dtype));
  w.u16(0);
  w.u32(std::uint32_t(dims.w));
  w.u32(std::uint32_t(dims.h));
  w.u32(std::uint32_t(dims.d));
  w.u32(std::uint32_t(dims.t));
  w.u64(0);
  for (double v : values) {
    switch (dtype) {
      case DType::Float32: w.f32(float(v)); break;
      case DType::Float64: w.f64(v); break;
      case DType::Int16: w.u16(std::uint16_t(saturate_round<std::int16_t>(v))); break;
      case DType::Int32: w.u32(std::uint32_t(saturate_round<std::int32_t>(v))); break;
    }
  }
  return w.take();
}

struct RawBin {
  Dims4 dims;
  DType dtype;
  std::vector<double> values;
};

RawBin decode_rawbin(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::CorruptHeader);
  if (r.str(4) != std::string_view(kRawMagic, 4)) throw Error(ErrorKind::CorruptHeader, "bad rawbin magic");
  if (r.u8() != kRawVersion) throw Error(ErrorKind::CorruptHeader, "unknown rawbin version");
  const std::uint8_t code = r.u8();
  if (code > 3) throw Error(ErrorKind::UnsupportedDatatype, "rawbin dtype code " + std::to_string(code));
  RawBin out;
  out.dtype = DType(code);
  r.u16();
  out.dims.w = int(r.u32());
  out.dims.h = int(r.u32());
  out.dims.d = int(r.u32());
  out.dims.t = int(r.u32());
  r.u64();
  check_dims(out.dims, ErrorKind::CorruptHeader);
  const std::size_t n = out.dims.count();
  if (r.remaining() != n * dtype_bytes(out.dtype)) {
    throw Error(ErrorKind::CorruptHeader, "rawbin payload size does not match dimensions");
  }
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (out.dtype) {
      case DType::Float32: out.values[i] = r.f32(); break;
      case DType::Float64: out.values[i] = r.f64(); break;
      case DType::Int16: out.values[i] = std::int16_t(r.u16()); break;
      case DType::Int32: out.values[i] = std::int32_t(r.u32()); break;
    }
  }
  return out;
}

// Endian-aware field access over the NIfTI-1 header.
struct NiftiFields {
  std::span<const std::uint8_t> b;
  bool swap;

  template <typename T>
  T raw(std::size_t off) const {
    T v;
    std::memcpy(&v, b.data() + off, sizeof(T));
    if (swap) {
      auto* p = reinterpret_cast<unsigned char*>(&v);
      std::reverse(p, p + sizeof(T));
    }
    return v;
  }
  std::int16_t i16(std::size_t off) const { return raw<std::int16_t>(off); }
  std::int32_t i32(std::size_t off) const { return raw<std::int32_t>(off); }
  float f32(std::size_t off) const { return std::bit_cast<float>(raw<std::uint32_t>(off)); }
  double f64(std::size_t off) const { return std::bit_cast<double>(raw<std::uint64_t>(off)); }
};

Volume4D load_nifti(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() < kNiftiHeader) throw Error(ErrorKind::CorruptHeader, "file shorter than NIfTI header");

  NiftiFields hdr{bytes, false};
  if (hdr.i32(0) != int(kNiftiHeader)) {
    hdr.swap = true;
    if (hdr.i32(0) != int(kNiftiHeader)) throw Error(ErrorKind::CorruptHeader, "sizeof_hdr is not 348");
  }
  const std::string magic(reinterpret_cast<const char*>(bytes.data() + 344), 4);
  const bool single_file = magic == std::string("n+1\0", 4);
  if (!single_file && magic != std::string("ni1\0", 4)) {
    throw Error(ErrorKind::CorruptHeader, "bad NIfTI magic");
  }
  const int ndim = hdr.i16(40);
  if (ndim < 1 || ndim > 7) throw Error(ErrorKind::CorruptHeader, "dim[0] out of range");
  if (ndim != 4) throw Error(ErrorKind::DimensionMismatch, "dim[0] = " + std::to_string(ndim) + ", expected 4");
  Dims4 dims{hdr.i16(42), hdr.i16(44), hdr.i16(46), hdr.i16(48)};
  check_dims(dims, ErrorKind::CorruptHeader);

  const int datatype = hdr.i16(70);
  std::size_t elem = 0;
  DType src;
  switch (datatype) {
    case 4: elem = 2; src = DType::Int16; break;
    case 16: elem = 4; src = DType::Float32; break;
    case 64: elem = 8; src = DType::Float64; break;
    default: throw Error(ErrorKind::UnsupportedDatatype, "NIfTI datatype " + std::to_string(datatype));
  }
  const float vox_offset = hdr.f32(108);
  const float slope = hdr.f32(112);
  const float inter = hdr.f32(116);

  std::vector<std::uint8_t> img;
  std::size_t start = 0;
  if (single_file) {
    if (!(vox_offset >= float(kNiftiHeader))) throw Error(ErrorKind::CorruptHeader, "vox_offset inside header");
    start = std::size_t(vox_offset);
  } else {
    std::filesystem::path img_path = path;
    img_path.replace_extension(".img");
    img = read_file(img_path);
    start = vox_offset > 0 ? std::size_t(vox_offset) : 0;
  }
  std::span<const std::uint8_t> payload = single_file ? std::span<const std::uint8_t>(bytes)
                                                      : std::span<const std::uint8_t>(img);
  const std::size_t n = dims.count();
  if (start > payload.size() || payload.size() - start < n * elem) {
    throw Error(ErrorKind::CorruptHeader, "NIfTI payload shorter than dimensions imply");
  }
  NiftiFields data{payload.subspan(start), hdr.swap};

  const bool scaled = slope != 0.0f && std::isfinite(slope) && std::isfinite(inter);
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0;
    switch (src) {
      case DType::Int16: v = data.i16(i * 2); break;
      case DType::Float32: v = data.f32(i * 4); break;
      case DType::Float64: v = data.f64(i * 8); break;
      default: break;
    }
    if (scaled) v = double(slope) * v + double(inter);
    values[i] = float(v);
  }
  check_finite(values);
  Volume4D vol(dims, std::move(values));
  vol.source_dtype = src;
  if (scaled) vol.voxel_scale = {double(inter), double(slope)};
  return vol;
}

}  // namespace

std::size_t dtype_bytes(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Int16: return 2;
    case DType::Int32: return 4;
    case DType::Float64: return 8;
  }
  return 0;
}

Volume4D::Volume4D(Dims4 dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
  check_dims(dims_, ErrorKind::ShapeMismatch);
  if (data_.size() != dims_.count()) throw Error(ErrorKind::ShapeMismatch, "data size does not match dims");
}

Volume4D Volume4D::zeros(Dims4 dims) { return Volume4D(dims, std::vector<float>(dims.count(), 0.0f)); }

Mask3D::Mask3D(Dims3 dims, std::vector<std::uint8_t> data) : dims_(dims), data_(std::move(data)) {
  if (data_.size() != dims_.count()) throw Error(ErrorKind::ShapeMismatch, "mask size does not match dims");
}

Mask3D Mask3D::full(Dims3 dims) { return Mask3D(dims, std::vector<std::uint8_t>(dims.count(), 1)); }

std::size_t Mask3D::count() const {
  return std::size_t(std::count_if(data_.begin(), data_.end(), [](std::uint8_t v) { return v != 0; }));
}

Volume4D load_volume(const std::filesystem::path& path, VolumeFormat format) {
  if (format == VolumeFormat::Nifti1) return load_nifti(path);
  RawBin raw = decode_rawbin(read_file(path));
  std::vector<float> values(raw.values.begin(), raw.values.end());
  check_finite(values);
  Volume4D vol(raw.dims, std::move(values));
  vol.source_dtype = raw.dtype;
  return vol;
}

Volume4D load_volume(const std::filesystem::path& path) {
  return load_volume(path, path.extension() == ".nii" ? VolumeFormat::Nifti1 : VolumeFormat::RawBin);
}

void save_rawbin(const Volume4D& vol, const std::filesystem::path& path, DType dtype) {
  std::vector<double> values(vol.data().begin(), vol.data().end());
  write_file(path, encode_rawbin(vol.dims(), dtype, values));
}

void save_labels(const LabelVolume& labels, const std::filesystem::path& path) {
  std::vector<double> values(labels.data.begin(), labels.data.end());
  write_file(path, encode_rawbin({labels.dims.w, labels.dims.h, labels.dims.d, 1}, DType::Int32, values));
}

LabelVolume load_labels(const std::filesystem::path& path) {
  RawBin raw = decode_rawbin(read_file(path));
  if (raw.dims.t != 1) throw Error(ErrorKind::DimensionMismatch, "label volume must have T = 1");
  LabelVolume out{raw.dims.spatial(), {}};
  out.data.reserve(raw.values.size());
  for (double v : raw.values) out.data.push_back(std::int32_t(v));
  return out;
}

void save_mask(const Mask3D& mask, const std::filesystem::path& path) {
  std::vector<double> values(mask.data().begin(), mask.data().end());
  const Dims3 d = mask.dims();
  write_file(path, encode_rawbin({d.w, d.h, d.d, 1}, DType::Int16, values));
}

Mask3D load_mask(const std::filesystem::path& path) {
  RawBin raw = decode_rawbin(read_file(path));
  if (raw.dims.t != 1) throw Error(ErrorKind::DimensionMismatch, "mask volume must have T = 1");
  std::vector<std::uint8_t> bits;
  bits.reserve(raw.values.size());
  for (double v : raw.values) bits.push_back(v != 0.0 ? 1 : 0);
  Mask3D mask(raw.dims.spatial(), std::move(bits));
  if (mask.count() == 0) throw Error(ErrorKind::EmptyMask, "mask file has no true voxels");
  return mask;
}

MeanFrame temporal_mean(const Volume4D& vol) {
  const Dims4 d = vol.dims();
  const std::size_t nv = d.voxels();
  std::vector<double> acc(nv, 0.0);
  auto data = vol.data();
  for (int t = 0; t < d.t; ++t) {
    const float* frame = data.data() + nv * std::size_t(t);
    for (std::size_t i = 0; i < nv; ++i) acc[i] += frame[i];
  }
  MeanFrame mean{d.spatial(), std::vector<float>(nv)};
  for (std::size_t i = 0; i < nv; ++i) mean.data[i] = float(acc[i] / d.t);
  return mean;
}

MeanSplit split_mean(const Volume4D& vol) {
  MeanSplit out{temporal_mean(vol), vol};
  const std::size_t nv = vol.dims().voxels();
  auto res = out.residual.data();
  for (int t = 0; t < vol.dims().t; ++t) {
    float* frame = res.data() + nv * std::size_t(t);
    for (std::size_t i = 0; i < nv; ++i) frame[i] -= out.mean.data[i];
  }
  return out;
}

Volume4D add_mean(const Volume4D& residual, const MeanFrame& mean) {
  if (residual.dims().spatial() != mean.dims) throw Error(ErrorKind::ShapeMismatch, "mean frame dims differ");
  Volume4D out = residual;
  const std::size_t nv = mean.dims.count();
  auto data = out.data();
  for (int t = 0; t < residual.dims().t; ++t) {
    float* frame = data.data() + nv * std::size_t(t);
    for (std::size_t i = 0; i < nv; ++i) frame[i] += mean.data[i];
  }
  return out;
}

VoxelSeriesSet apply_mask(const Volume4D& vol, const Mask3D& mask) {
  const Dims4 d = vol.dims();
  if (mask.dims() != d.spatial()) throw Error(ErrorKind::ShapeMismatch, "mask dims differ from volume");
  const std::size_t n = mask.count();
  if (n == 0) throw Error(ErrorKind::EmptyMask, "mask has no true voxels");

  VoxelSeriesSet out;
  out.dims = d.spatial();
  out.coords.reserve(n);
  // Lexicographic (x, y, z): x is the slowest index here.
  for (int x = 0; x < d.w; ++x)
    for (int y = 0; y < d.h; ++y)
      for (int z = 0; z < d.d; ++z)
        if (mask.at(x, y, z)) out.coords.push_back({x, y, z});

  out.series.resize(Eigen::Index(n), d.t);
  for (std::size_t i = 0; i < n; ++i) {
    const Coord& c = out.coords[i];
    for (int t = 0; t < d.t; ++t) out.series(Eigen::Index(i), t) = vol.at(c[0], c[1], c[2], t);
  }
  return out;
}

Mask3D auto_mask(const Volume4D& vol, double rel_threshold) {
  if (!(rel_threshold > 0.0 && rel_threshold < 1.0)) {
    throw Error(ErrorKind::Config, "rel_threshold must lie in (0, 1)");
  }
  const MeanFrame mean = temporal_mean(vol);
  const float peak = *std::max_element(mean.data.begin(), mean.data.end());
  const double cut = rel_threshold * double(peak);
  std::vector<std::uint8_t> bits(mean.data.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = double(mean.data[i]) > cut ? 1 : 0;
  Mask3D mask(mean.dims, std::move(bits));
  if (mask.count() == 0) throw Error(ErrorKind::EmptyMask, "no voxel passes the intensity threshold");
  return mask;
}

}  // namespace icnr
