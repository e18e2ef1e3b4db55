#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace icnr {

enum class DType : std::uint8_t { Float32 = 0, Int16 = 1, Int32 = 2, Float64 = 3 };

std::size_t dtype_bytes(DType dtype);

struct Dims3 {
  int w = 0, h = 0, d = 0;

  std::size_t count() const { return std::size_t(w) * std::size_t(h) * std::size_t(d); }
  std::size_t index(int x, int y, int z) const {
    return std::size_t(x) + std::size_t(w) * (std::size_t(y) + std::size_t(h) * std::size_t(z));
  }
  bool operator==(const Dims3&) const = default;
};

struct Dims4 {
  int w = 0, h = 0, d = 0, t = 0;

  Dims3 spatial() const { return {w, h, d}; }
  std::size_t voxels() const { return spatial().count(); }
  std::size_t count() const { return voxels() * std::size_t(t); }
  bool operator==(const Dims4&) const = default;
};

// Affine map from the stored numbers back to source units: value = offset + gain * stored.
struct VoxelScale {
  double offset = 0.0;
  double gain = 1.0;
};

// Dense (x, y, z, t) scalar field, x fastest then y, z, t.
class Volume4D {
 public:
  Volume4D() = default;
  Volume4D(Dims4 dims, std::vector<float> data);
  static Volume4D zeros(Dims4 dims);

  const Dims4& dims() const { return dims_; }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  float at(int x, int y, int z, int t) const { return data_[offset(x, y, z, t)]; }
  float& at(int x, int y, int z, int t) { return data_[offset(x, y, z, t)]; }

  std::size_t offset(int x, int y, int z, int t) const {
    return dims_.spatial().index(x, y, z) + dims_.voxels() * std::size_t(t);
  }

  VoxelScale voxel_scale;
  DType source_dtype = DType::Float32;

 private:
  Dims4 dims_;
  std::vector<float> data_;
};

class Mask3D {
 public:
  Mask3D() = default;
  Mask3D(Dims3 dims, std::vector<std::uint8_t> data);
  static Mask3D full(Dims3 dims);

  const Dims3& dims() const { return dims_; }
  bool at(int x, int y, int z) const { return data_[dims_.index(x, y, z)] != 0; }
  void set(int x, int y, int z, bool v) { data_[dims_.index(x, y, z)] = v ? 1 : 0; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::size_t count() const;

 private:
  Dims3 dims_;
  std::vector<std::uint8_t> data_;
};

struct MeanFrame {
  Dims3 dims;
  std::vector<float> data;

  float at(int x, int y, int z) const { return data[dims.index(x, y, z)]; }
};

// Integer label field (region labels, atlases). Negative labels mean "unassigned".
struct LabelVolume {
  Dims3 dims;
  std::vector<std::int32_t> data;

  std::int32_t at(int x, int y, int z) const { return data[dims.index(x, y, z)]; }
};

using Coord = std::array<int, 3>;

struct VoxelSeriesSet {
  Dims3 dims;
  std::vector<Coord> coords;
  Eigen::MatrixXd series;  // n_voxels x T, row i belongs to coords[i]
};

enum class VolumeFormat { Nifti1, RawBin };

Volume4D load_volume(const std::filesystem::path& path, VolumeFormat format);
// Picks the format from the extension (.nii -> NIfTI-1, anything else -> rawbin).
Volume4D load_volume(const std::filesystem::path& path);

// Writes the rawbin container. Integer dtypes round and saturate.
void save_rawbin(const Volume4D& vol, const std::filesystem::path& path,
                 DType dtype = DType::Float32);

void save_labels(const LabelVolume& labels, const std::filesystem::path& path);
LabelVolume load_labels(const std::filesystem::path& path);
void save_mask(const Mask3D& mask, const std::filesystem::path& path);
Mask3D load_mask(const std::filesystem::path& path);

struct MeanSplit {
  MeanFrame mean;
  Volume4D residual;
};

MeanSplit split_mean(const Volume4D& vol);
Volume4D add_mean(const Volume4D& residual, const MeanFrame& mean);

VoxelSeriesSet apply_mask(const Volume4D& vol, const Mask3D& mask);
Mask3D auto_mask(const Volume4D& vol, double rel_threshold = 0.1);

// Per-voxel temporal mean, no copy of the residual.
MeanFrame temporal_mean(const Volume4D& vol);

}  // namespace icnr
