#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "icnr/error.hpp"
#include "icnr/eval.hpp"
#include "icnr/glm.hpp"
#include "icnr/ssim.hpp"
#include "icnr/svm.hpp"
#include "icnr/synth.hpp"

using namespace icnr;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

struct PhantomCase {
  SynthResult synth;
  Mask3D mask;
  std::vector<int> labels;
};

PhantomCase phantom(std::uint64_t seed, double snr = 20.0) {
  const Dims4 dims{16, 16, 8, 64};
  const StimulusSpec stim = make_event_design(4, 64, 3, 2, seed);
  PhantomCase p{generate(dims, stim, HrfParams{}, 4, snr, seed, SynthOptions{0.625}), {}, {}};
  std::vector<std::uint8_t> m(dims.voxels());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = p.synth.truth.region_labels.data[i] >= 0;
  p.mask = Mask3D(dims.spatial(), m);
  p.labels = frame_labels(p.synth.truth.patterns, 0, 1);
  return p;
}

Eigen::MatrixXd blobs(int n, double sep, std::uint64_t seed, std::vector<int>& labels) {
  Rng rng(seed);
  Eigen::MatrixXd X(n, 5);
  labels.assign(std::size_t(n), 0);
  for (int i = 0; i < n; ++i) {
    labels[std::size_t(i)] = i % 2;
    for (int j = 0; j < 5; ++j) X(i, j) = rng.normal() + (j == 0 ? (i % 2 ? sep : -sep) : 0.0);
  }
  return X;
}

}  // namespace

TEST_CASE("psnr") {
  const Volume4D a = testutil::random_volume({6, 5, 4, 7}, 1);
  CHECK(psnr(a, a) == kPsnrCap);
  const Volume4D two(Dims4{2, 1, 1, 1}, {0.0f, 1.0f});
  const Volume4D zero(Dims4{2, 1, 1, 1}, {0.0f, 0.0f});
  CHECK(psnr(two, zero, nullptr, 1.0) == doctest::Approx(3.0103).epsilon(1e-4));
  CHECK(psnr(two, zero) == doctest::Approx(3.0103).epsilon(1e-4));

  Rng rng(2);
  std::vector<float> u(200000), n(200000);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = float(rng.uniform());
    n[i] = float(u[i] + rng.normal() * 0.01);
  }
  const Volume4D big(Dims4{50, 40, 10, 10}, u), noisy(Dims4{50, 40, 10, 10}, n);
  CHECK(std::abs(psnr(big, noisy, nullptr, 1.0) - 40.0) < 0.5);
  CHECK_THROWS_AS(psnr(a, testutil::random_volume({6, 5, 4, 6}, 1)), Error);
}

TEST_CASE("ssim2d") {
  const Eigen::MatrixXd a = testutil::random_matrix(16, 16, 3);
  CHECK(ssim2d(a, a) == 1.0);
  SsimOptions fixed;
  fixed.data_range = a.maxCoeff() - a.minCoeff();
  double prev = 1.0;
  for (double c : {0.1, 0.3, 1.0, 3.0}) {
    const double s = ssim2d(a, (a.array() + c).matrix(), fixed);
    CHECK(s < prev);
    prev = s;
  }
  Eigen::MatrixXd board(16, 16);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) board(i, j) = (i + j) % 2;
  CHECK(ssim2d(board, (1.0 - board.array()).matrix()) < 0.0);
  CHECK(kind_of([&] { ssim2d(a.topRows(10), a.topRows(10)); }) == ErrorKind::TooSmall);
  CHECK(kind_of([&] { ssim2d(a, a.leftCols(15)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("ssim2d gradient matches central differences") {
  const Eigen::MatrixXd a = testutil::random_matrix(12, 13, 4);
  const Eigen::MatrixXd b = a + 0.4 * testutil::random_matrix(12, 13, 5);
  Eigen::MatrixXd g;
  ssim2d_grad(a, b, {}, g);
  auto f = [&](const Eigen::VectorXd& v) { return ssim2d(a, Eigen::Map<const Eigen::MatrixXd>(v.data(), 12, 13)); };
  const Eigen::VectorXd bv = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  CHECK(testutil::fd_rel_error(f, bv, Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()), 1e-4) < 1e-3);
}

TEST_CASE("glm exact fit and null distribution") {
  StimulusSpec s;
  s.n_stimuli = 2;
  s.T = 80;
  s.onsets = {{5, 40}, {20, 60}};
  s.durations = {{3, 3}, {2, 4}};
  const HrfParams hrf;
  const Eigen::MatrixXd X = design_matrix(s, hrf);
  CHECK(X.cols() == 4);
  const Glm glm(X);
  const Eigen::VectorXd y = 5.0 * X.col(0) + Eigen::VectorXd::Constant(80, 3.0);
  CHECK(glm.beta(y)(0) == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(glm.t_value(y, 0) == kTCap);

  Rng rng(7);
  double sum = 0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd noise(80);
    for (int t = 0; t < 80; ++t) noise(t) = rng.normal();
    sum += glm.t_value(noise, 0);
  }
  CHECK(std::abs(sum / 1000) < 0.1);

  StimulusSpec tiny = s;
  tiny.T = 3;
  tiny.onsets = {{0}, {1}};
  tiny.durations = {{1}, {1}};
  CHECK(kind_of([&] { Glm g(design_matrix(tiny, hrf)); }) == ErrorKind::SingularDesign);
  Eigen::MatrixXd dup = X;
  dup.col(1) = dup.col(0);
  CHECK(kind_of([&] { Glm g(dup); }) == ErrorKind::SingularDesign);
}

TEST_CASE("fla on the phantom") {
  const PhantomCase p = phantom(3);
  const Mask3D full = Mask3D::full(p.synth.volume.dims().spatial());
  const TMap t = fla(p.synth.volume, p.synth.truth.stimulus, HrfParams{}, full, 0);
  double in = 0, out = 0;
  int nin = 0, nout = 0;
  for (std::size_t i = 0; i < t.t.size(); ++i) {
    CHECK(std::isfinite(t.t[i]));
    if (p.synth.truth.region_labels.data[i] == 0) in += std::abs(t.t[i]), ++nin;
    else out += std::abs(t.t[i]), ++nout;
  }
  MESSAGE("region |t| " << in / nin << " vs rest " << out / nout);
  CHECK(in / nin >= 5 * out / nout);

  // affine rescaling leaves t unchanged
  Volume4D scaled = p.synth.volume;
  for (float& v : scaled.data()) v = 3.5f * v + 20.0f;
  const TMap ts = fla(scaled, p.synth.truth.stimulus, HrfParams{}, p.mask, 0);
  const TMap tm = fla(p.synth.volume, p.synth.truth.stimulus, HrfParams{}, p.mask, 0);
  for (std::size_t i = 0; i < tm.t.size(); ++i) {
    if (!p.mask.data()[i]) {
      CHECK(std::isnan(tm.t[i]));
      continue;
    }
    CHECK(std::abs(ts.t[i] - tm.t[i]) <= 1e-4 * std::max(1.0, double(std::abs(tm.t[i]))));
  }
}

TEST_CASE("fla_residual") {
  TMap a{{3, 1, 1}, {1.0f, -2.0f, 4.0f}, 10, 0};
  const Mask3D m = Mask3D::full({3, 1, 1});
  const MeanStd z = fla_residual(a, a, m);
  CHECK(z.mean == 0.0);
  CHECK(z.std == 0.0);
  TMap b = a;
  for (float& v : b.t) v += 1;
  const MeanStd one = fla_residual(a, b, m);
  CHECK(one.mean == doctest::Approx(1.0));
  CHECK(one.std == doctest::Approx(0.0));
  TMap c{{2, 1, 1}, {1.0f, 1.0f}, 10, 0};
  CHECK_THROWS_AS(fla_residual(a, c, m), Error);
}

TEST_CASE("fca") {
  const Dims4 d{3, 1, 1, 30};
  Volume4D v = Volume4D::zeros(d);
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const float s = float(rng.normal());
    v.at(0, 0, 0, t) = s;
    v.at(1, 0, 0, t) = 2 * s + 1;
    v.at(2, 0, 0, t) = -s;
  }
  const LabelVolume atlas{{3, 1, 1}, {0, 1, 2}};
  const ConnectivityMatrix c = fca(v, atlas);
  CHECK(c.r(0, 1) == doctest::Approx(1.0));
  CHECK(c.r(0, 2) == doctest::Approx(-1.0));
  for (int i = 0; i < 3; ++i) {
    CHECK(c.r(i, i) == 1.0);
    for (int j = 0; j < 3; ++j) {
      CHECK(c.r(i, j) == c.r(j, i));
      CHECK(std::abs(c.r(i, j)) <= 1.0);
    }
  }
  Volume4D flat = v;
  for (int t = 0; t < 30; ++t) flat.at(2, 0, 0, t) = 4.0f;
  CHECK(fca(flat, atlas).r(0, 2) == 0.0);
  const LabelVolume gap{{3, 1, 1}, {0, 2, 2}};
  CHECK(kind_of([&] { fca(v, gap); }) == ErrorKind::EmptyRegion);

  ConnectivityMatrix m1{Eigen::Matrix3d::Identity(), {0, 1, 2}}, m2 = m1;
  m2.r(0, 2) = m2.r(2, 0) = 0.5;
  CHECK(fca_residual(m1, m2).mean == doctest::Approx(0.5 / 3));
  CHECK(fca_residual(m1, m1).mean == 0.0);
  ConnectivityMatrix m4{Eigen::Matrix4d::Identity(), {0, 1, 2, 3}};
  CHECK_THROWS_AS(fca_residual(m1, m4), Error);
}

TEST_CASE("fca on the phantom: regions with independent stimuli decorrelate") {
  const PhantomCase p = phantom(4);
  const ConnectivityMatrix c = fca(p.synth.volume, p.synth.truth.region_labels);
  REQUIRE(c.r.rows() == 4);
  int below = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) below += std::abs(c.r(i, j)) < 0.3;
  MESSAGE("connectivity\n" << c.r);
  CHECK(std::abs(c.r(0, 1)) < 0.3);
  CHECK(below >= 5);
}

TEST_CASE("linear svm and auc") {
  CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75));
  CHECK(roc_auc({1, 1}, {0, 1}) == 0.5);
  std::vector<int> labels;
  const Eigen::MatrixXd X = blobs(60, 4.0, 1, labels);
  std::vector<int> y;
  for (int l : labels) y.push_back(l ? 1 : -1);
  LinearSvm svm;
  svm.fit(X, y);
  const Eigen::VectorXd s = svm.decision(X);
  int correct = 0;
  for (int i = 0; i < 60; ++i) correct += (s(i) > 0) == (y[std::size_t(i)] > 0);
  CHECK(correct == 60);
  CHECK(svm.weights()(0) > 0);
}

TEST_CASE("ct") {
  std::vector<int> labels;
  const Eigen::MatrixXd X = blobs(200, 5.0, 2, labels);
  const CtResult sep = ct_features(X, labels, 10, 1);
  CHECK(sep.accuracy > 0.99);
  CHECK(sep.auc > 0.999);

  Rng rng(5);
  std::vector<int> shuffled = labels;
  rng.shuffle(shuffled);
  const CtResult null = ct_features(X, shuffled, 10, 1);
  CHECK(std::abs(null.accuracy - 0.5) <= 0.1);

  const Eigen::MatrixXd scaled = 1000.0 * X;
  const CtResult s2 = ct_features(scaled, labels, 10, 1);
  CHECK(s2.accuracy == doctest::Approx(sep.accuracy));
  Eigen::MatrixXd per = X;
  for (int j = 0; j < per.cols(); ++j) per.col(j) *= (j + 1) * 7.0;
  CHECK(ct_features(per, labels, 10, 1).accuracy == doctest::Approx(sep.accuracy));

  std::vector<int> few(20, 0);
  few[0] = few[1] = few[2] = 1;
  CHECK(kind_of([&] { ct_features(X.topRows(20), few, 10, 1); }) == ErrorKind::TooFewSamples);
}

TEST_CASE("evaluate_pair") {
  const PhantomCase p = phantom(5);
  EvalContext ctx;
  ctx.mask = p.mask;
  ctx.stimulus = p.synth.truth.stimulus;
  ctx.atlas = p.synth.truth.region_labels;
  ctx.frame_labels = p.labels;
  ctx.folds = 5;
  ctx.ratio = 30.0;

  const EvalReport same = evaluate_pair(p.synth.volume, p.synth.volume, ctx);
  CHECK(same.psnr == kPsnrCap);
  CHECK(*same.ssim == 1.0);
  CHECK(same.fla_residual->mean == 0.0);
  CHECK(same.fla_residual->std == 0.0);
  CHECK(same.fca_residual->mean == 0.0);
  CHECK(same.fca_residual->std == 0.0);
  CHECK(same.skipped.empty());

  Volume4D noisy = p.synth.volume;
  Rng rng(6);
  for (float& v : noisy.data()) v += float(rng.normal() * 0.05);
  const EvalReport worse = evaluate_pair(p.synth.volume, noisy, ctx);
  CHECK(worse.psnr < same.psnr);
  CHECK(*worse.ssim < *same.ssim);
  CHECK(worse.fla_residual->mean > same.fla_residual->mean);
  CHECK(worse.fca_residual->mean > same.fca_residual->mean);

  const nlohmann::json j = worse.to_json();
  validate_report_json(j);
  const EvalReport back = EvalReport::from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.to_json() == j);

  EvalContext bare;
  const EvalReport skip = evaluate_pair(p.synth.volume, p.synth.volume, bare);
  CHECK(skip.skipped.size() == 3);
  CHECK(!skip.ct);
  validate_report_json(skip.to_json());

  nlohmann::json extra = j;
  extra["bogus"] = 1;
  CHECK_THROWS_AS(validate_report_json(extra), Error);
  nlohmann::json missing = j;
  missing.erase("psnr");
  CHECK_THROWS_AS(validate_report_json(missing), Error);
  nlohmann::json typed = j;
  typed["ct"]["accuracy"] = "high";
  CHECK_THROWS_AS(validate_report_json(typed), Error);
}
