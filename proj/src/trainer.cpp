#include "icnr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "icnr/error.hpp"
#include "icnr/rng.hpp"
#include "icnr/ssim.hpp"

namespace icnr {

namespace {

class Adamax {
 public:
  Adamax(Eigen::Index n, double lr) : lr_(lr), m_(Eigen::VectorXd::Zero(n)), u_(Eigen::VectorXd::Zero(n)) {}

  // Updates params[begin, end) only.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, Eigen::Index begin, Eigen::Index end) {
    ++t_;
    const double bias = 1.0 - std::pow(kBeta1, double(t_));
    for (Eigen::Index i = begin; i < end; ++i) {
      m_(i) = kBeta1 * m_(i) + (1.0 - kBeta1) * grad(i);
      u_(i) = std::max(kBeta2 * u_(i), std::abs(grad(i)) + kEps);
      params(i) -= lr_ / bias * m_(i) / u_(i);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double lr_;
  long t_ = 0;
  Eigen::VectorXd m_, u_;
};

SsimOptions batch_ssim_options(const Eigen::MatrixXd& gt) {
  SsimOptions o;
  o.window = fitted_window(gt.rows(), gt.cols(), 11);
  return o;
}

void check_shapes(const Eigen::MatrixXd& gt, const Eigen::MatrixXd& pred) {
  if (gt.rows() != pred.rows() || gt.cols() != pred.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "batch_loss: prediction and target shapes differ");
  }
  if (gt.rows() < 1 || gt.cols() < 1) throw Error(ErrorKind::ShapeMismatch, "batch_loss: empty batch");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m, int start, int len) { return m.middleCols(start, len); }

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw Error(ErrorKind::Config, "train.lr must be > 0");
  if (epochs < 1) throw Error(ErrorKind::Config, "train.epochs must be >= 1");
  if (pretrain_epochs < 0) throw Error(ErrorKind::Config, "train.pretrain_epochs must be >= 0");
  if (batch_voxels < 1) throw Error(ErrorKind::Config, "train.batch_voxels must be >= 1");
  if (!(ssim_weight >= 0)) throw Error(ErrorKind::Config, "train.ssim_weight must be >= 0");
  if (chunk_len && *chunk_len < 1) throw Error(ErrorKind::Config, "train.chunk_len must be >= 1");
}

std::string TrainConfig::canonical() const {
  std::ostringstream s;
  s.precision(17);
  s << "lr=" << lr << ";epochs=" << epochs << ";pretrain_epochs=" << pretrain_epochs << ";pretrain_lr=" << pretrain_lr
    << ";batch_voxels=" << batch_voxels << ";ssim_weight=" << ssim_weight << ";seed=" << seed
    << ";chunk_len=" << (chunk_len ? *chunk_len : 0);
  return s.str();
}

Normalization Normalization::fit(const Eigen::MatrixXd& series) {
  Normalization n;
  n.offset = series.mean();
  const double var = (series.array() - n.offset).square().mean();
  n.scale = var > 0 ? std::sqrt(var) : 1.0;
  return n;
}

double batch_loss(const Eigen::MatrixXd& gt, const Eigen::MatrixXd& pred, double sigma) {
  check_shapes(gt, pred);
  const double mse = (gt - pred).squaredNorm() / double(gt.size());
  if (sigma == 0.0) return mse;
  return (1.0 - ssim2d(gt, pred, batch_ssim_options(gt))) * sigma + mse;
}

BatchLoss batch_loss_grad(const Eigen::MatrixXd& gt, const Eigen::MatrixXd& pred, double sigma) {
  check_shapes(gt, pred);
  BatchLoss out;
  const double n = double(gt.size());
  out.mse = (gt - pred).squaredNorm() / n;
  out.grad = 2.0 * (pred - gt) / n;
  if (sigma != 0.0) {
    Eigen::MatrixXd g;
    out.ssim = ssim2d_grad(gt, pred, batch_ssim_options(gt), g);
    out.grad -= sigma * g;
  } else {
    out.ssim = 1.0;
  }
  out.loss = (1.0 - out.ssim) * sigma + out.mse;
  return out;
}

std::vector<std::pair<int, int>> make_batches(int n, int batch, std::uint64_t seed) {
  std::vector<std::pair<int, int>> runs;
  if (n <= 0) return runs;
  batch = std::clamp(batch, 1, n);
  if (batch == n) return {{0, n}};
  Rng rng(seed);
  const int phase = int(rng.below(std::uint64_t(batch)));
  const int min_run = std::min(11, batch);
  int start = 0;
  if (phase > 0) {
    runs.push_back({0, phase});
    start = phase;
  }
  for (; start < n; start += batch) runs.push_back({start, std::min(batch, n - start)});
  // Fold short runs into a neighbour so every batch keeps spatial extent.
  std::vector<std::pair<int, int>> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && (r.second < min_run || merged.back().second < min_run)) {
      merged.back().second += r.second;
    } else {
      merged.push_back(r);
    }
  }
  rng.shuffle(merged);
  return merged;
}

Eigen::MatrixXd embed_set(const VoxelSeriesSet& set, int L) {
  return embed_batch(normalized_coords(set.coords, set.dims), L);
}

Eigen::MatrixXd predict_all(const InrModel& model, const Eigen::MatrixXd& embedded, int batch) {
  const Eigen::Index n = embedded.cols();
  Eigen::MatrixXd out(n, model.config().T);
  InrModel::Workspace ws;
  for (Eigen::Index s = 0; s < n; s += batch) {
    const Eigen::Index len = std::min<Eigen::Index>(batch, n - s);
    const Eigen::MatrixXd e = embedded.middleCols(s, len);
    out.middleRows(s, len) = model.forward(e, ws);
  }
  return out;
}

std::vector<double> pretrain(InrModel& model, const IcaDecomposition& decomp, const VoxelSeriesSet& set,
                             const TrainConfig& cfg) {
  cfg.validate();
  const ModelConfig& mc = model.config();
  if (decomp.K() != mc.K) throw Error(ErrorKind::KMismatch, "ICA component count differs from model K");
  if (decomp.T() != mc.T) throw Error(ErrorKind::LengthMismatch, "ICA pattern length differs from model T");
  if (decomp.maps.rows() != Eigen::Index(set.coords.size())) {
    throw Error(ErrorKind::ShapeMismatch, "ICA maps do not align with the voxel set");
  }
  model.set_bank(components_for_init(decomp, mc.T));

  std::vector<double> curve;
  if (cfg.pretrain_epochs == 0) return curve;
  const Eigen::MatrixXd embedded = embed_set(set, mc.embed_freqs);
  const Eigen::MatrixXd targets = decomp.maps.transpose();  // K x n
  const int n = int(embedded.cols());
  const auto [begin, end] = model.weight_field_range();
  Adamax opt(model.parameters().size(), cfg.pretrain_lr > 0 ? cfg.pretrain_lr : cfg.lr);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.parameters().size());
  InrModel::WeightWorkspace ws;
  Rng seeds(cfg.seed ^ 0x5052455452414e31ULL);
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    double total = 0.0;
    for (const auto& [start, len] : make_batches(n, cfg.batch_voxels, seeds.next_u64())) {
      const Eigen::MatrixXd e = gather_cols(embedded, start, len);
      const Eigen::MatrixXd& w = model.forward_weights(e, ws);
      const Eigen::MatrixXd diff = w - targets.middleCols(start, len);
      const double denom = double(diff.size());
      const double loss = diff.squaredNorm() / denom;
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::NonFiniteLoss, "pretraining loss became non-finite at epoch " + std::to_string(epoch));
      }
      total += loss * len;
      grad.segment(begin, end - begin).setZero();
      model.backward_weights(ws, 2.0 * diff / denom, grad);
      opt.step(model.parameters(), grad, begin, end);
    }
    curve.push_back(total / n);
  }
  return curve;
}

TrainReport train(InrModel& model, const VoxelSeriesSet& set, const TrainConfig& cfg) {
  cfg.validate();
  const ModelConfig& mc = model.config();
  if (set.series.cols() != mc.T) throw Error(ErrorKind::LengthMismatch, "series length differs from model T");
  if (!set.series.allFinite()) throw Error(ErrorKind::NonFiniteInput, "training series contain NaN or Inf");
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXd embedded = embed_set(set, mc.embed_freqs);
  const int n = int(embedded.cols());

  std::ofstream log;
  if (!cfg.metrics_log.empty()) {
    log.open(cfg.metrics_log);
    if (!log) throw Error(ErrorKind::Io, "cannot open metrics log " + cfg.metrics_log);
  }

  TrainReport report;
  Adamax opt(model.parameters().size(), cfg.lr);
  Eigen::VectorXd grad(model.parameters().size());
  InrModel::Workspace ws;
  Rng seeds(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& [start, len] : make_batches(n, cfg.batch_voxels, seeds.next_u64())) {
      const Eigen::MatrixXd e = gather_cols(embedded, start, len);
      const Eigen::MatrixXd& pred = model.forward(e, ws);
      const BatchLoss bl = batch_loss_grad(set.series.middleRows(start, len), pred, cfg.ssim_weight);
      if (!std::isfinite(bl.loss) || !bl.grad.allFinite()) {
        report.finite = false;
        throw Error(ErrorKind::NonFiniteLoss, "training loss became non-finite at epoch " + std::to_string(epoch) +
                                                  " (batch at voxel " + std::to_string(start) + ")");
      }
      total += bl.loss * len;
      grad.setZero();
      model.backward(ws, bl.grad, grad);
      opt.step(model.parameters(), grad, 0, grad.size());
    }
    report.loss_curve.push_back(total / n);
    if (log) {
      nlohmann::json j{{"epoch", epoch + 1}, {"loss", total / n}, {"lr", cfg.lr}, {"wall_time", seconds_since(t0)}};
      log << j.dump() << '\n';
    }
  }

  const Eigen::MatrixXd pred = predict_all(model, embedded);
  const double mse = (pred - set.series).squaredNorm() / double(pred.size());
  const double peak = set.series.maxCoeff() - set.series.minCoeff();
  report.final_psnr = mse > 0 && peak > 0 ? std::min(300.0, 10.0 * std::log10(peak * peak / mse)) : 300.0;
  report.converged = report.loss_curve.back() < report.loss_curve.front();
  report.wall_time = seconds_since(t0);
  return report;
}

}  // namespace icnr
