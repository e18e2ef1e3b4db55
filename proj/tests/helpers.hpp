#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icnr/rng.hpp"
#include "icnr/volume.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("icnr_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path operator/(const std::string& name) const { return path / name; }
};

// Minimal independent NIfTI-1 writer: 348-byte header, 4 pad bytes, payload.
struct NiftiSpec {
  std::int16_t ndim = 4;
  std::int16_t dims[4] = {1, 1, 1, 1};
  std::int16_t datatype = 4;  // int16
  float slope = 0.0f, inter = 0.0f;
  bool big_endian = false;
  const char* magic = "n+1";
};

template <typename T>
void put(std::vector<std::uint8_t>& b, std::size_t off, T v, bool big) {
  unsigned char tmp[sizeof(T)];
  std::memcpy(tmp, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) b[off + i] = big ? tmp[sizeof(T) - 1 - i] : tmp[i];
}

inline void write_nifti(const fs::path& p, const NiftiSpec& s, const std::vector<double>& values) {
  std::vector<std::uint8_t> b(352, 0);
  put<std::int32_t>(b, 0, 348, s.big_endian);
  put<std::int16_t>(b, 40, s.ndim, s.big_endian);
  for (int i = 0; i < 4; ++i) put<std::int16_t>(b, 42 + 2 * i, s.dims[i], s.big_endian);
  put<std::int16_t>(b, 70, s.datatype, s.big_endian);
  put<float>(b, 108, 352.0f, s.big_endian);
  put<float>(b, 112, s.slope, s.big_endian);
  put<float>(b, 116, s.inter, s.big_endian);
  std::memcpy(b.data() + 344, s.magic, 4);
  const std::size_t elem = s.datatype == 4 ? 2 : s.datatype == 16 ? 4 : 8;
  const std::size_t base = b.size();
  b.resize(base + values.size() * elem);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (s.datatype == 4) put<std::int16_t>(b, base + i * 2, std::int16_t(values[i]), s.big_endian);
    else if (s.datatype == 16) put<float>(b, base + i * 4, float(values[i]), s.big_endian);
    else put<double>(b, base + i * 8, values[i], s.big_endian);
  }
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

inline icnr::Volume4D random_volume(icnr::Dims4 dims, std::uint64_t seed, double scale = 1.0) {
  icnr::Rng rng(seed);
  std::vector<float> v(dims.count());
  for (float& x : v) x = float(rng.normal() * scale);
  return icnr::Volume4D(dims, std::move(v));
}

inline Eigen::MatrixXd random_matrix(int r, int c, std::uint64_t seed) {
  icnr::Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

// Largest relative error between an analytic gradient and central differences of f,
// normalised by max(|analytic|, |numeric|, floor).
inline double fd_rel_error(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                           const Eigen::VectorXd& grad, double eps, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + eps;
    const double fp = f(x);
    x(i) = keep - eps;
    const double fm = f(x);
    x(i) = keep;
    const double num = (fp - fm) / (2 * eps);
    const double denom = std::max({std::abs(num), std::abs(grad(i)), floor});
    worst = std::max(worst, std::abs(num - grad(i)) / denom);
  }
  return worst;
}

// Amari index of P = W A, normalised to [0, 1]; 0 means a scaled permutation.
inline double amari_index(const Eigen::MatrixXd& p) {
  const Eigen::Index k = p.rows();
  if (k < 2) return 0.0;
  const Eigen::MatrixXd a = p.cwiseAbs();
  double s = 0;
  for (Eigen::Index i = 0; i < k; ++i) s += a.row(i).sum() / a.row(i).maxCoeff() - 1;
  for (Eigen::Index j = 0; j < k; ++j) s += a.col(j).sum() / a.col(j).maxCoeff() - 1;
  return s / (2.0 * double(k) * double(k - 1));
}

inline double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd x = a.array() - a.mean();
  const Eigen::VectorXd y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

// Best |corr| per true source row after matching each to its closest estimate.
inline std::vector<double> matched_correlations(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& est) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    double best = 0;
    for (Eigen::Index j = 0; j < est.rows(); ++j)
      best = std::max(best, std::abs(correlation(truth.row(i).transpose(), est.row(j).transpose())));
    out.push_back(best);
  }
  return out;
}

}  // namespace testutil
