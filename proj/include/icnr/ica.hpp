#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace icnr {

struct Whitening {
  Eigen::MatrixXd signals;     // k x T, zero mean, identity covariance over time
  Eigen::MatrixXd whitener;    // k x n, signals = whitener * centered(series)
  Eigen::MatrixXd dewhitener;  // n x k, pseudo-inverse of whitener
  Eigen::VectorXd row_means;   // n, removed before whitening
  Eigen::VectorXd eigenvalues; // all eigenvalues of the temporal covariance, descending
  double discarded_power = 0.0;  // sum over time of the dropped eigen-components
};

// Rows of `series` are variables (voxels), columns are samples (time).
Whitening whiten(const Eigen::MatrixXd& series, int k);

struct IcaOptions {
  double tol = 1e-4;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

struct IcaDecomposition {
  Eigen::MatrixXd patterns;   // K x T, unit variance, max-|.| sample positive
  Eigen::MatrixXd maps;       // n_voxels x K
  Eigen::VectorXd row_means;  // per-voxel temporal means removed before decomposition
  Eigen::MatrixXd whitener;   // K x n
  Eigen::MatrixXd unmixing;   // K x n, patterns = unmixing * centered(series)
  int iterations = 0;
  bool non_converged = false;

  int K() const { return int(patterns.rows()); }
  int T() const { return int(patterns.cols()); }
  Eigen::MatrixXd reconstruct() const;  // maps * patterns + row means
};

IcaDecomposition fast_ica(const Eigen::MatrixXd& series, int k, const IcaOptions& opts = {});

// Pattern-bank initialisation; the decomposition must already have length T_target.
Eigen::MatrixXd components_for_init(const IcaDecomposition& decomp, int T_target);

}  // namespace icnr
