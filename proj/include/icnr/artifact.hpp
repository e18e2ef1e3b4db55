#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "icnr/bytes.hpp"
#include "icnr/model.hpp"
#include "icnr/quantize.hpp"
#include "icnr/trainer.hpp"
#include "icnr/volume.hpp"

namespace icnr {

constexpr std::uint16_t kArtifactVersion = 1;

struct CodecOptions {
  int bits = 8;
  bool mean_lossless = true;
  int mean_quality = 90;

  void validate() const;
};

struct ChunkModel {
  int t0 = 0, t1 = 0;  // frames [t0, t1)
  Normalization norm;
  InrModel model;
};

struct Artifact {
  Dims4 dims;
  DType source_dtype = DType::Int16;
  VoxelScale voxel_scale;
  ModelConfig model;  // T is per chunk
  std::string train_digest;
  CodecOptions codec;
  Mask3D mask;
  MeanFrame mean;
  std::vector<ChunkModel> chunks;
};

struct RatioReport {
  std::uint64_t original_bytes = 0;
  std::uint64_t artifact_bytes = 0;
  double ratio = 0.0;
};

RatioReport compression_ratio(const Dims4& dims, DType source_dtype, std::uint64_t artifact_bytes);

// Mask as alternating run lengths, starting with a run of zeros.
std::vector<std::uint8_t> encode_mask_rle(const Mask3D& mask);
Mask3D decode_mask_rle(std::span<const std::uint8_t> bytes, Dims3 dims);

// Quantized tensor as a standalone section body: raw bit-packed or
// Huffman-coded, whichever is smaller.
void write_tensor(ByteWriter& out, const QuantizedTensor& q);
QuantizedTensor read_tensor(ByteReader& in, std::size_t expected_size);

// Quantizes every chunk model; the returned artifact bytes are self-contained.
std::vector<std::uint8_t> pack(const Artifact& artifact);
// Parameters come back as the dequantized values; mean frame decoded.
Artifact unpack(std::span<const std::uint8_t> bytes);

}  // namespace icnr
