#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace icnr {

struct QuantizedTensor {
  std::vector<std::uint32_t> symbols;
  float scale = 1.0f;
  float offset = 0.0f;
  int bits = 8;
  std::vector<int> shape;

  double value(std::size_t i) const { return double(offset) + double(scale) * double(symbols[i]); }
  std::vector<double> dequantize() const;
};

// Per-tensor affine quantization. offset/scale are stored as float32, offset
// rounded down and scale rounded up, so every value stays within scale/2.
QuantizedTensor quantize_tensor(std::span<const double> values, int bits, std::vector<int> shape = {});

}  // namespace icnr
