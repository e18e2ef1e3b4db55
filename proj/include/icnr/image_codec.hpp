#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "icnr/volume.hpp"

namespace icnr {

enum class ImageCodec : std::uint8_t { Png = 0, Jpeg = 1 };

// 8-bit grayscale raster, row-major.
struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

std::vector<std::uint8_t> encode_png(const Gray8& img);
std::vector<std::uint8_t> encode_jpeg(const Gray8& img, int quality);
Gray8 decode_png(std::span<const std::uint8_t> bytes);
Gray8 decode_jpeg(std::span<const std::uint8_t> bytes);

// Depth slices mapped to 8 bits per slice (value = lo + step * pixel) and stacked
// into a W x (H*D) mosaic, PNG when lossless, JPEG at `quality` otherwise.
std::vector<std::uint8_t> encode_mean_frame(const MeanFrame& mean, int quality, bool lossless);
MeanFrame decode_mean_frame(std::span<const std::uint8_t> payload);

}  // namespace icnr
