#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "icnr/ica.hpp"
#include "icnr/model.hpp"
#include "icnr/volume.hpp"

namespace icnr {

struct TrainConfig {
  double lr = 8e-4;
  int epochs = 1500;
  int pretrain_epochs = 100;
  double pretrain_lr = 0.0;  // <= 0: same as lr
  int batch_voxels = 4096;
  double ssim_weight = 0.1;
  std::uint64_t seed = 0;
  std::optional<int> chunk_len;
  std::string metrics_log;  // JSON-lines output, empty to disable

  void validate() const;
  // Stable textual form, hashed into the artifact header.
  std::string canonical() const;
};

struct TrainReport {
  std::vector<double> loss_curve;
  std::vector<double> pretrain_curve;
  double final_psnr = 0.0;
  double wall_time = 0.0;
  bool finite = true;
  bool converged = false;  // final epoch loss below the first one
};

// Global affine normalization: normalized = (x - offset) / scale.
struct Normalization {
  double offset = 0.0;
  double scale = 1.0;

  static Normalization fit(const Eigen::MatrixXd& series);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const { return (x.array() - offset).matrix() / scale; }
  Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const { return (x.array() * scale + offset).matrix(); }
};

struct BatchLoss {
  double loss = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
  Eigen::MatrixXd grad;  // d loss / d pred
};

// (1 - SSIM(gt, pred)) * sigma + MSE over a b x T batch seen as an image.
// The SSIM window shrinks to the largest odd size fitting the batch.
double batch_loss(const Eigen::MatrixXd& gt, const Eigen::MatrixXd& pred, double sigma);
BatchLoss batch_loss_grad(const Eigen::MatrixXd& gt, const Eigen::MatrixXd& pred, double sigma);

// Contiguous [start, start+len) runs covering 0..n-1: cut at a random phase,
// short tails merged into their neighbour, order shuffled.
std::vector<std::pair<int, int>> make_batches(int n, int batch, std::uint64_t seed);

// 6L x n embedding of every coordinate of the set.
Eigen::MatrixXd embed_set(const VoxelSeriesSet& set, int L);

// Model output for every column of `embedded`, n x T.
Eigen::MatrixXd predict_all(const InrModel& model, const Eigen::MatrixXd& embedded, int batch = 4096);

// Copies the ICA patterns into the bank, then fits the weight fields to the ICA maps by MSE.
std::vector<double> pretrain(InrModel& model, const IcaDecomposition& decomp, const VoxelSeriesSet& set,
                             const TrainConfig& cfg);

// Joint Adamax optimisation of every parameter on the combined loss.
// `set.series` is expected in normalized units.
TrainReport train(InrModel& model, const VoxelSeriesSet& set, const TrainConfig& cfg);

}  // namespace icnr
