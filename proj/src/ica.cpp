#include "icnr/ica.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icnr/error.hpp"
#include "icnr/rng.hpp"

namespace icnr {

namespace {

// W <- (W W^T)^{-1/2} W
Eigen::MatrixXd symmetric_decorrelate(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w * w.transpose());
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * w;
}

}  // namespace

Whitening whiten(const Eigen::MatrixXd& series, int k) {
  const Eigen::Index n = series.rows();
  const Eigen::Index T = series.cols();
  if (k < 1 || k > std::min(n, T)) throw Error(ErrorKind::RankDeficient, "k must satisfy 1 <= k <= min(n, T)");

  Whitening out;
  out.row_means = series.rowwise().mean();
  const Eigen::MatrixXd centered = series.colwise() - out.row_means;

  // Eigen-decompose whichever Gram matrix is smaller; both share nonzero spectra.
  Eigen::MatrixXd basis;  // n x k voxel-space eigenvectors
  Eigen::VectorXd top(k);
  if (n <= T) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered * centered.transpose() / double(T));
    out.eigenvalues = es.eigenvalues().reverse();
    basis = es.eigenvectors().rowwise().reverse().leftCols(k);
    top = out.eigenvalues.head(k);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered.transpose() * centered / double(T));
    out.eigenvalues = es.eigenvalues().reverse();
    top = out.eigenvalues.head(k);
    const Eigen::MatrixXd v = es.eigenvectors().rowwise().reverse().leftCols(k);
    basis.resize(n, k);
    for (int i = 0; i < k; ++i) {
      if (top(i) > 0) basis.col(i) = centered * v.col(i) / std::sqrt(double(T) * top(i));
      else basis.col(i).setZero();
    }
  }
  const double largest = std::max(out.eigenvalues(0), 0.0);
  for (int i = 0; i < k; ++i) {
    if (!(top(i) > 1e-10 * largest) || largest == 0.0) {
      throw Error(ErrorKind::RankDeficient, "only " + std::to_string(i) + " non-negligible eigenvalues, need " +
                                                std::to_string(k));
    }
  }
  const Eigen::VectorXd inv_sqrt = top.cwiseSqrt().cwiseInverse();
  out.whitener = inv_sqrt.asDiagonal() * basis.transpose();
  out.dewhitener = basis * top.cwiseSqrt().asDiagonal();
  out.signals = out.whitener * centered;
  double dropped = 0.0;
  for (Eigen::Index i = k; i < out.eigenvalues.size(); ++i) dropped += std::max(out.eigenvalues(i), 0.0);
  out.discarded_power = dropped * double(T);
  return out;
}

IcaDecomposition fast_ica(const Eigen::MatrixXd& series, int k, const IcaOptions& opts) {
  if (k < 1) throw Error(ErrorKind::Config, "k must be >= 1");
  if (!(opts.tol > 0)) throw Error(ErrorKind::Config, "tol must be > 0");
  const Whitening wh = whiten(series, k);
  const Eigen::MatrixXd& z = wh.signals;
  const double T = double(z.cols());

  Rng rng(opts.seed);
  Eigen::MatrixXd w(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) w(i, j) = rng.normal();
  w = symmetric_decorrelate(w);

  IcaDecomposition out;
  out.non_converged = true;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::MatrixXd proj = w * z;  // k x T
    const Eigen::MatrixXd g = proj.array().tanh().matrix();
    const Eigen::VectorXd g_prime_mean = (1.0 - g.array().square()).rowwise().mean();
    Eigen::MatrixXd w_new = g * z.transpose() / T - g_prime_mean.asDiagonal() * w;
    w_new = symmetric_decorrelate(w_new);
    const double rotation = (1.0 - (w_new * w.transpose()).diagonal().array().abs()).abs().maxCoeff();
    w = w_new;
    out.iterations = it + 1;
    if (rotation < opts.tol) {
      out.non_converged = false;
      break;
    }
  }

  Eigen::MatrixXd sources = w * z;
  Eigen::MatrixXd unmixing = w * wh.whitener;
  for (int i = 0; i < k; ++i) {
    const double mean = sources.row(i).mean();
    sources.row(i).array() -= mean;
    const double sd = std::sqrt(sources.row(i).squaredNorm() / T);
    Eigen::Index arg = 0;
    sources.row(i).cwiseAbs().maxCoeff(&arg);
    const double sign = sources(i, arg) < 0 ? -1.0 : 1.0;
    sources.row(i) *= sign / sd;
    unmixing.row(i) *= sign / sd;
  }

  const Eigen::MatrixXd centered = series.colwise() - wh.row_means;
  Eigen::MatrixXd maps = (sources * sources.transpose()).ldlt().solve(sources * centered.transpose()).transpose();

  // Stable component order: descending spatial energy.
  std::vector<int> order{};
  order.resize(std::size_t(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return maps.col(a).squaredNorm() > maps.col(b).squaredNorm(); });

  out.patterns.resize(k, sources.cols());
  out.maps.resize(maps.rows(), k);
  out.unmixing.resize(k, unmixing.cols());
  for (int i = 0; i < k; ++i) {
    out.patterns.row(i) = sources.row(order[std::size_t(i)]);
    out.maps.col(i) = maps.col(order[std::size_t(i)]);
    out.unmixing.row(i) = unmixing.row(order[std::size_t(i)]);
  }
  out.row_means = wh.row_means;
  out.whitener = wh.whitener;
  return out;
}

Eigen::MatrixXd IcaDecomposition::reconstruct() const {
  return (maps * patterns).colwise() + row_means;
}

Eigen::MatrixXd components_for_init(const IcaDecomposition& decomp, int T_target) {
  if (decomp.T() != T_target) {
    throw Error(ErrorKind::LengthMismatch, "decomposition has T = " + std::to_string(decomp.T()) +
                                               ", target " + std::to_string(T_target));
  }
  return decomp.patterns;
}

}  // namespace icnr
