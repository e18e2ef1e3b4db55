#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "icnr/artifact.hpp"
#include "icnr/ica.hpp"
#include "icnr/model.hpp"
#include "icnr/trainer.hpp"
#include "icnr/volume.hpp"

namespace icnr {

enum class BankInit { Ica, Uniform, Normal };

struct CompressOptions {
  ModelConfig model;  // T is replaced by each chunk length
  TrainConfig train;
  IcaOptions ica;
  CodecOptions codec;
  BankInit init = BankInit::Ica;
};

struct ChunkReport {
  int t0 = 0, t1 = 0;
  TrainReport train;
  int ica_iterations = 0;
  bool ica_converged = true;
};

struct CompressResult {
  std::vector<std::uint8_t> bytes;
  RatioReport ratio;
  std::vector<ChunkReport> chunks;
  double psnr = 0.0;  // decompressed vs input, in-mask
};

// [t0, t1) ranges; no chunk_len gives a single chunk.
std::vector<std::pair<int, int>> chunk_ranges(int T, std::optional<int> chunk_len);

// Mean split, then per chunk: normalization, ICA, bank init + pretraining, training.
std::vector<ChunkModel> train_chunked(const Volume4D& residual, const Mask3D& mask, const CompressOptions& opts,
                                      std::vector<ChunkReport>* reports = nullptr);

CompressResult compress_volume(const Volume4D& vol, const Mask3D& mask, const CompressOptions& opts);

Volume4D decompress(const Artifact& artifact);
Volume4D decompress(std::span<const std::uint8_t> bytes);

// Reference codec: spatial block means of edge `spatial`, temporal block means of
// length `temporal`, stored as int16, reconstructed by separable linear interpolation.
struct BlockCodecResult {
  Volume4D reconstruction;
  std::uint64_t bytes = 0;
};
BlockCodecResult block_average_codec(const Volume4D& vol, int spatial, int temporal);

}  // namespace icnr
