#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "json.hpp"
#include "icnr/error.hpp"
#include "icnr/ica.hpp"
#include "icnr/pipeline.hpp"
#include "icnr/ssim.hpp"
#include "icnr/synth.hpp"
#include "icnr/trainer.hpp"

using namespace icnr;

namespace {

// Brute-force SSIM: explicit Gaussian window, valid positions only.
double reference_ssim(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int win, double L) {
  std::vector<double> g(static_cast<std::size_t>(win));
  double s = 0;
  for (int i = 0; i < win; ++i) s += g[std::size_t(i)] = std::exp(-0.5 * std::pow((i - win / 2) / 1.5, 2));
  for (double& v : g) v /= s;
  const double c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double total = 0;
  int count = 0;
  for (Eigen::Index r = 0; r + win <= a.rows(); ++r)
    for (Eigen::Index c = 0; c + win <= a.cols(); ++c) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double w = g[std::size_t(i)] * g[std::size_t(j)];
          const double x = a(r + i, c + j), y = b(r + i, c + j);
          ma += w * x, mb += w * y, saa += w * x * x, sbb += w * y * y, sab += w * x * y;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

struct Phantom {
  VoxelSeriesSet set;
  IcaDecomposition ica;
};

Phantom phantom(std::uint64_t seed = 1) {
  const Dims4 dims{16, 16, 8, 64};
  const StimulusSpec stim = make_event_design(4, 64, 3, 2, seed);
  const SynthResult r = generate(dims, stim, HrfParams{}, 4, 20.0, seed, SynthOptions{0.625});
  std::vector<std::uint8_t> m(dims.voxels());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = r.truth.region_labels.data[i] >= 0;
  const MeanSplit split = split_mean(r.volume);
  Phantom p;
  p.set = apply_mask(split.residual, Mask3D(dims.spatial(), m));
  p.set.series = Normalization::fit(p.set.series).apply(p.set.series);
  p.ica = fast_ica(p.set.series, 4, IcaOptions{1e-4, 500, seed});
  return p;
}

ModelConfig desk_model(int width = 24) {
  ModelConfig c;
  c.K = 4;
  c.T = 64;
  c.embed_freqs = 4;
  c.mlp_layers = 3;
  c.mlp_width = width;
  c.feat_channels = 2;
  c.fusion_levels = 2;
  c.fusion_width = 4;
  return c;
}

TrainConfig desk_train(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.pretrain_lr = 1e-2;
  t.seed = 1;
  return t;
}

VoxelSeriesSet two_voxels() {
  VoxelSeriesSet s;
  s.dims = {2, 1, 1};
  s.coords = {{0, 0, 0}, {1, 0, 0}};
  s.series.resize(2, 16);
  for (int t = 0; t < 16; ++t) {
    s.series(0, t) = std::sin(0.4 * t);
    s.series(1, t) = 0.5 * std::cos(0.3 * t) - 0.2;
  }
  return s;
}

}  // namespace

TEST_CASE("batch_loss identities") {
  const Eigen::MatrixXd gt = testutil::random_matrix(16, 32, 1);
  CHECK(batch_loss(gt, gt, 0.1) == doctest::Approx(0.0).epsilon(1e-12));
  const Eigen::MatrixXd pred = testutil::random_matrix(16, 32, 2);
  const double mse = (gt - pred).squaredNorm() / double(gt.size());
  CHECK(batch_loss(gt, pred, 0.0) == doctest::Approx(mse).epsilon(1e-12));
  CHECK_THROWS_AS(batch_loss(gt, pred.leftCols(31), 0.1), Error);
}

TEST_CASE("batch_loss cross-checks the standalone SSIM and a brute-force one") {
  const Eigen::MatrixXd gt = testutil::random_matrix(16, 32, 3);
  const Eigen::MatrixXd pred = gt + 0.3 * testutil::random_matrix(16, 32, 4);
  const double mse = (gt - pred).squaredNorm() / double(gt.size());
  const double L = gt.maxCoeff() - gt.minCoeff();
  const double ref = reference_ssim(gt, pred, 11, L);
  CHECK(ssim2d(gt, pred) == doctest::Approx(ref).epsilon(1e-10));
  CHECK(std::abs(batch_loss(gt, pred, 0.1) - ((1 - ssim2d(gt, pred)) * 0.1 + mse)) < 1e-6);
  CHECK(std::abs(batch_loss(gt, pred, 0.1) - ((1 - ref) * 0.1 + mse)) < 1e-6);
  // smaller batches use the largest odd window that fits
  const Eigen::MatrixXd g6 = gt.topRows(6), p6 = pred.topRows(6);
  CHECK(fitted_window(6, 32) == 5);
  CHECK(std::abs(batch_loss(g6, p6, 1.0) - ((1 - reference_ssim(g6, p6, 5, g6.maxCoeff() - g6.minCoeff())) +
                                            (g6 - p6).squaredNorm() / double(g6.size()))) < 1e-6);
}

TEST_CASE("batch_loss gradient matches central differences on 8x8") {
  const Eigen::MatrixXd gt = testutil::random_matrix(8, 8, 5);
  const Eigen::MatrixXd pred = gt + 0.5 * testutil::random_matrix(8, 8, 6);
  const BatchLoss bl = batch_loss_grad(gt, pred, 0.1);
  CHECK(bl.loss == doctest::Approx(batch_loss(gt, pred, 0.1)).epsilon(1e-12));
  auto f = [&](const Eigen::VectorXd& v) {
    return batch_loss(gt, Eigen::Map<const Eigen::MatrixXd>(v.data(), 8, 8), 0.1);
  };
  const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(pred.data(), 64);
  const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(bl.grad.data(), 64);
  CHECK(testutil::fd_rel_error(f, p, g, 1e-3) < 1e-3);
  // large sigma weights the SSIM part heavily, still exact
  const BatchLoss heavy = batch_loss_grad(gt, pred, 10.0);
  auto fh = [&](const Eigen::VectorXd& v) {
    return batch_loss(gt, Eigen::Map<const Eigen::MatrixXd>(v.data(), 8, 8), 10.0);
  };
  CHECK(testutil::fd_rel_error(fh, p, Eigen::Map<const Eigen::VectorXd>(heavy.grad.data(), 64), 1e-3) < 1e-3);
}

TEST_CASE("make_batches covers every voxel once in contiguous runs") {
  for (int n : {1, 7, 100, 255, 4097}) {
    for (int batch : {4, 32, 4096}) {
      const auto runs = make_batches(n, batch, 9);
      std::vector<int> seen(std::size_t(n), 0);
      for (auto [s, len] : runs) {
        CHECK(len >= 1);
        CHECK(len <= batch + std::min(11, batch));
        for (int i = s; i < s + len; ++i) ++seen[std::size_t(i)];
        if (n >= std::min(11, batch)) CHECK(len >= std::min({11, batch, n}));
      }
      for (int c : seen) CHECK(c == 1);
      CHECK(make_batches(n, batch, 9) == runs);
    }
  }
}

TEST_CASE("normalization") {
  const Eigen::MatrixXd x = 3.0 * testutil::random_matrix(20, 10, 7).array() + 5.0;
  const Normalization n = Normalization::fit(x);
  const Eigen::MatrixXd y = n.apply(x);
  CHECK(std::abs(y.mean()) < 1e-12);
  CHECK(std::sqrt((y.array() - y.mean()).square().mean()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((n.invert(y) - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pretrain copies the bank and fits the ICA maps") {
  const Phantom p = phantom();
  SUBCASE("zero epochs leaves the MLPs alone") {
    InrModel m(desk_model(), 1);
    const Eigen::VectorXd before = m.parameters();
    TrainConfig t = desk_train(1);
    t.pretrain_epochs = 0;
    CHECK(pretrain(m, p.ica, p.set, t).empty());
    CHECK(Eigen::MatrixXd(m.bank()) == p.ica.patterns);
    const auto [b, e] = m.weight_field_range();
    CHECK(m.parameters().segment(b, e - b) == before.segment(b, e - b));
  }
  SUBCASE("phantom maps within 0.01 MSE") {
    InrModel m(desk_model(), 1);
    const Eigen::VectorXd before = m.parameters();
    const auto curve = pretrain(m, p.ica, p.set, desk_train(1));
    CHECK(curve.size() == 100);
    CHECK(Eigen::MatrixXd(m.bank()) == p.ica.patterns);
    const Eigen::MatrixXd w = m.predict_weights(embed_set(p.set, 4));
    const double mse = (w - p.ica.maps.transpose()).squaredNorm() / double(w.size());
    MESSAGE("pretrain map mse " << mse);
    CHECK(mse < 0.01);
    const auto [f0, f1] = m.fusion_range();
    CHECK(m.parameters().segment(f0, f1 - f0) == before.segment(f0, f1 - f0));
  }
  SUBCASE("mismatch guards") {
    InrModel wrong_k(desk_model(), 1);
    ModelConfig c3 = desk_model();
    c3.K = 3;
    InrModel k3(c3, 1);
    CHECK_THROWS_AS(pretrain(k3, p.ica, p.set, desk_train(1)), Error);
    ModelConfig t32 = desk_model();
    t32.T = 32;
    InrModel short_t(t32, 1);
    try {
      pretrain(short_t, p.ica, p.set, desk_train(1));
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::LengthMismatch);
    }
  }
}

TEST_CASE("two-voxel overfit") {
  const VoxelSeriesSet s = two_voxels();
  ModelConfig c;
  c.K = 2;
  c.T = 16;
  c.embed_freqs = 2;
  c.mlp_layers = 3;
  c.mlp_width = 16;
  c.feat_channels = 2;
  c.fusion_width = 4;
  TrainConfig t;
  t.lr = 2e-2;
  t.seed = 3;

  InrModel early(c, 3);
  t.epochs = 50;
  train(early, s, t);
  const Eigen::MatrixXd w = early.predict_weights(embed_set(s, 2));
  CHECK((w.col(0) - w.col(1)).norm() > 1e-3);

  InrModel m(c, 3);
  t.epochs = 500;
  const TrainReport r = train(m, s, t);
  const Eigen::MatrixXd pred = m.forward(embed_set(s, 2));
  for (int v = 0; v < 2; ++v) {
    const double mse = (pred.row(v) - s.series.row(v)).squaredNorm() / 16.0;
    CAPTURE(v);
    CHECK(mse < 1e-3);
  }
  CHECK(r.loss_curve.size() == 500);
  CHECK(r.converged);
}

TEST_CASE("phantom training: finite, decreasing, deterministic, logged") {
  const Phantom p = phantom();
  testutil::TempDir dir("train_log");
  TrainConfig t = desk_train(200);
  t.metrics_log = (dir / "m.jsonl").string();
  InrModel a(desk_model(), 1);
  pretrain(a, p.ica, p.set, t);
  const TrainReport ra = train(a, p.set, t);
  for (double l : ra.loss_curve) CHECK(std::isfinite(l));
  CHECK(ra.loss_curve.back() < ra.loss_curve.front());

  std::ifstream log(t.metrics_log);
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("loss"));
    CHECK(j.contains("lr"));
    CHECK(j.contains("wall_time"));
    ++lines;
  }
  CHECK(lines == 200);

  t.metrics_log.clear();
  InrModel b(desk_model(), 1);
  pretrain(b, p.ica, p.set, t);
  train(b, p.set, t);
  CHECK(a.parameters() == b.parameters());
}

TEST_CASE("loss falls tenfold from a random start") {
  // Random bank, no pretraining: the ICA warm start already begins near the floor.
  const Phantom p = phantom();
  InrModel m(desk_model(), 2);
  TrainConfig t = desk_train(400);
  t.lr = 3e-3;
  const TrainReport r = train(m, p.set, t);
  MESSAGE("loss " << r.loss_curve.front() << " -> " << r.loss_curve.back());
  CHECK(r.loss_curve.back() * 10 <= r.loss_curve.front());
}

TEST_CASE("wider weight fields do not fit worse") {
  const Phantom p = phantom();
  std::vector<double> small, wide;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (int width : {12, 24}) {
      InrModel m(desk_model(width), seed);
      TrainConfig t = desk_train(150);
      t.seed = seed;
      pretrain(m, p.ica, p.set, t);
      const double l = train(m, p.set, t).loss_curve.back();
      (width == 12 ? small : wide).push_back(l);
    }
  }
  std::sort(small.begin(), small.end());
  std::sort(wide.begin(), wide.end());
  MESSAGE("median final loss width 12: " << small[1] << ", width 24: " << wide[1]);
  CHECK(wide[1] <= small[1] * 1.05);
}

TEST_CASE("non-finite training raises NonFiniteLoss") {
  const VoxelSeriesSet s = two_voxels();
  ModelConfig c;
  c.K = 2;
  c.T = 16;
  c.embed_freqs = 2;
  c.mlp_layers = 2;
  c.mlp_width = 4;
  c.feat_channels = 2;
  c.fusion_width = 4;
  InrModel m(c, 1);
  TrainConfig t;
  t.lr = 1e300;
  t.epochs = 50;
  try {
    train(m, s, t);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
  }
  VoxelSeriesSet bad = s;
  bad.series(0, 0) = std::nan("");
  CHECK_THROWS_AS(train(m, bad, t), Error);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.lr = 0;
  CHECK_THROWS_AS(t.validate(), Error);
  t = {};
  t.epochs = 0;
  CHECK_THROWS_AS(t.validate(), Error);
  t = {};
  t.ssim_weight = -1;
  CHECK_THROWS_AS(t.validate(), Error);
  t = {};
  CHECK(t.canonical() == TrainConfig{}.canonical());
  t.lr = 1e-3;
  CHECK(t.canonical() != TrainConfig{}.canonical());
}

TEST_CASE("chunking") {
  using R = std::vector<std::pair<int, int>>;
  CHECK(chunk_ranges(100, 40) == R{{0, 40}, {40, 80}, {80, 100}});
  CHECK(chunk_ranges(64, 64) == R{{0, 64}});
  CHECK(chunk_ranges(64, std::nullopt) == R{{0, 64}});
  CHECK_THROWS_AS(chunk_ranges(64, 65), Error);
}
