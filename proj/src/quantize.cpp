#include "icnr/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "icnr/error.hpp"

namespace icnr {

std::vector<double> QuantizedTensor::dequantize() const {
  std::vector<double> out(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) out[i] = value(i);
  return out;
}

QuantizedTensor quantize_tensor(std::span<const double> values, int bits, std::vector<int> shape) {
  if (bits < 1 || bits > 16) throw Error(ErrorKind::Config, "quantization bits must lie in [1, 16]");
  QuantizedTensor q;
  q.bits = bits;
  q.shape = shape.empty() ? std::vector<int>{int(values.size())} : std::move(shape);
  q.symbols.assign(values.size(), 0);
  if (values.empty()) return q;
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteInput, "cannot quantize a non-finite value");

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double levels = double((1u << bits) - 1);

  float offset = float(lo);
  if (double(offset) > lo) offset = std::nextafter(offset, -std::numeric_limits<float>::infinity());
  if (hi == lo && double(offset) == lo) {
    q.offset = offset;
    q.scale = 1.0f;
    return q;
  }
  float scale = float((hi - double(offset)) / levels);
  while (double(offset) + double(scale) * levels < hi) scale = std::nextafter(scale, std::numeric_limits<float>::infinity());
  if (!(scale > 0)) scale = std::numeric_limits<float>::min();
  q.offset = offset;
  q.scale = scale;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double s = std::round((values[i] - double(offset)) / double(scale));
    q.symbols[i] = std::uint32_t(std::clamp(s, 0.0, levels));
  }
  return q;
}

}  // namespace icnr
