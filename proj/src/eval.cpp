#include "icnr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "icnr/error.hpp"
#include "icnr/glm.hpp"
#include "icnr/rng.hpp"
#include "icnr/ssim.hpp"
#include "icnr/svm.hpp"

namespace icnr {

namespace {

void same_dims(const Volume4D& a, const Volume4D& b) {
  if (a.dims() != b.dims()) throw Error(ErrorKind::ShapeMismatch, "volumes differ in dims");
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / double(v.size()));
  return out;
}

nlohmann::json pair_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

double psnr(const Volume4D& a, const Volume4D& b, const Mask3D* mask, double peak) {
  same_dims(a, b);
  const Dims4& d = a.dims();
  if (mask && mask->dims() != d.spatial()) throw Error(ErrorKind::ShapeMismatch, "mask dims differ from volume");
  const std::size_t V = d.voxels();
  double se = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (int t = 0; t < d.t; ++t)
    for (std::size_t v = 0; v < V; ++v) {
      if (mask && !mask->data()[v]) continue;
      const std::size_t i = v + V * std::size_t(t);
      const double x = a.data()[i], y = b.data()[i];
      se += (x - y) * (x - y);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      ++n;
    }
  if (n == 0) throw Error(ErrorKind::EmptyMask, "PSNR over an empty mask");
  if (!(peak > 0)) peak = hi - lo;
  if (!(peak > 0)) peak = 1.0;
  const double mse = se / double(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim_volume(const Volume4D& a, const Volume4D& b) {
  same_dims(a, b);
  const Dims4& d = a.dims();
  const auto [lo, hi] = std::minmax_element(a.data().begin(), a.data().end());
  SsimOptions opts;
  opts.data_range = double(*hi) - double(*lo);
  if (!(opts.data_range > 0)) opts.data_range = 1.0;
  Eigen::MatrixXd sa(d.w, d.h), sb(d.w, d.h);
  double total = 0.0;
  for (int t = 0; t < d.t; ++t)
    for (int z = 0; z < d.d; ++z) {
      for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x) {
          sa(x, y) = a.at(x, y, z, t);
          sb(x, y) = b.at(x, y, z, t);
        }
      total += ssim2d(sa, sb, opts);
    }
  return total / double(d.d * d.t);
}

TMap fla(const Volume4D& vol, const StimulusSpec& stim, const HrfParams& hrf, const Mask3D& mask, int contrast) {
  const Dims4& d = vol.dims();
  if (stim.T != d.t) throw Error(ErrorKind::LengthMismatch, "stimulus length differs from the volume");
  if (mask.dims() != d.spatial()) throw Error(ErrorKind::ShapeMismatch, "mask dims differ from volume");
  stim.validate();
  const Glm glm(design_matrix(stim, hrf));
  TMap out;
  out.dims = d.spatial();
  out.dof = glm.dof();
  out.contrast = contrast;
  out.t.assign(d.voxels(), std::numeric_limits<float>::quiet_NaN());
  Eigen::VectorXd y(d.t);
  for (std::size_t v = 0; v < d.voxels(); ++v) {
    if (!mask.data()[v]) continue;
    for (int t = 0; t < d.t; ++t) y(t) = vol.data()[v + d.voxels() * std::size_t(t)];
    out.t[v] = float(glm.t_value(y, contrast));
  }
  return out;
}

MeanStd fla_residual(const TMap& a, const TMap& b, const Mask3D& mask) {
  if (!(a.dims == b.dims) || !(a.dims == mask.dims())) throw Error(ErrorKind::ShapeMismatch, "t-map dims differ");
  std::vector<double> diff;
  for (std::size_t v = 0; v < a.t.size(); ++v)
    if (mask.data()[v]) diff.push_back(std::abs(double(a.t[v]) - double(b.t[v])));
  return mean_std(diff);
}

ConnectivityMatrix fca(const Volume4D& vol, const LabelVolume& atlas) {
  const Dims4& d = vol.dims();
  if (!(atlas.dims == d.spatial()) || atlas.data.size() != d.voxels()) {
    throw Error(ErrorKind::ShapeMismatch, "atlas dims differ from volume");
  }
  int R = 0;
  for (std::int32_t l : atlas.data) R = std::max(R, int(l) + 1);
  if (R == 0) throw Error(ErrorKind::EmptyRegion, "atlas has no regions");
  Eigen::MatrixXd series = Eigen::MatrixXd::Zero(R, d.t);
  std::vector<int> members(std::size_t(R), 0);
  for (std::size_t v = 0; v < d.voxels(); ++v) {
    const int l = atlas.data[v];
    if (l < 0) continue;
    ++members[std::size_t(l)];
    for (int t = 0; t < d.t; ++t) series(l, t) += vol.data()[v + d.voxels() * std::size_t(t)];
  }
  for (int r = 0; r < R; ++r) {
    if (members[std::size_t(r)] == 0) throw Error(ErrorKind::EmptyRegion, "region " + std::to_string(r) + " is empty");
    series.row(r) /= members[std::size_t(r)];
  }
  Eigen::MatrixXd centered = series.colwise() - series.rowwise().mean();
  Eigen::VectorXd norms = centered.rowwise().norm();
  ConnectivityMatrix out;
  out.r = Eigen::MatrixXd::Identity(R, R);
  out.region_ids.resize(std::size_t(R));
  std::iota(out.region_ids.begin(), out.region_ids.end(), 0);
  for (int i = 0; i < R; ++i)
    for (int j = i + 1; j < R; ++j) {
      double c = 0.0;
      if (norms(i) > 0 && norms(j) > 0) c = std::clamp(centered.row(i).dot(centered.row(j)) / (norms(i) * norms(j)), -1.0, 1.0);
      out.r(i, j) = out.r(j, i) = c;
    }
  return out;
}

MeanStd fca_residual(const ConnectivityMatrix& a, const ConnectivityMatrix& b) {
  if (a.r.rows() != b.r.rows() || a.r.cols() != b.r.cols()) throw Error(ErrorKind::ShapeMismatch, "matrix sizes differ");
  std::vector<double> diff;
  for (Eigen::Index i = 0; i < a.r.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.r.cols(); ++j) diff.push_back(std::abs(a.r(i, j) - b.r(i, j)));
  return mean_std(diff);
}

CtResult ct_features(const Eigen::MatrixXd& X, const std::vector<int>& labels, int folds, std::uint64_t seed) {
  if (Eigen::Index(labels.size()) != X.rows()) throw Error(ErrorKind::ShapeMismatch, "label count differs from samples");
  if (folds < 2) throw Error(ErrorKind::Config, "need at least 2 folds");
  std::vector<std::vector<std::size_t>> by_class(2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::Config, "labels must be 0 or 1");
    by_class[std::size_t(labels[i])].push_back(i);
  }
  for (const auto& c : by_class)
    if (int(c.size()) < folds) {
      throw Error(ErrorKind::TooFewSamples, "class with " + std::to_string(c.size()) + " samples is below " +
                                                std::to_string(folds) + " folds");
    }
  Rng rng(seed);
  std::vector<int> fold_of(labels.size(), 0);
  for (auto& c : by_class) {
    rng.shuffle(c);
    for (std::size_t k = 0; k < c.size(); ++k) fold_of[c[k]] = int(k % std::size_t(folds));
  }

  std::vector<double> scores(labels.size(), 0.0);
  double acc_sum = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? test : train).push_back(Eigen::Index(i));
    Eigen::MatrixXd Xtr = X(train, Eigen::all), Xte = X(test, Eigen::all);
    const Eigen::RowVectorXd mu = Xtr.colwise().mean();
    Eigen::RowVectorXd sd = ((Xtr.rowwise() - mu).array().square().colwise().mean()).sqrt().matrix();
    for (Eigen::Index j = 0; j < sd.size(); ++j) sd(j) = sd(j) > 0 ? 1.0 / sd(j) : 0.0;
    Xtr = ((Xtr.rowwise() - mu).array().rowwise() * sd.array()).matrix();
    Xte = ((Xte.rowwise() - mu).array().rowwise() * sd.array()).matrix();
    std::vector<int> ytr;
    for (Eigen::Index i : train) ytr.push_back(labels[std::size_t(i)] ? 1 : -1);
    LinearSvm svm;
    SvmOptions opts;
    opts.seed = seed + std::uint64_t(f);
    svm.fit(Xtr, ytr, opts);
    const Eigen::VectorXd s = svm.decision(Xte);
    int correct = 0;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const std::size_t i = std::size_t(test[k]);
      scores[i] = s(Eigen::Index(k));
      correct += (s(Eigen::Index(k)) > 0) == (labels[i] == 1);
    }
    acc_sum += double(correct) / double(test.size());
  }
  CtResult out;
  out.accuracy = acc_sum / folds;
  out.auc = roc_auc(scores, labels);
  return out;
}

CtResult ct(const Volume4D& vol, const Mask3D& mask, const std::vector<int>& frame_labels, int folds,
            std::uint64_t seed) {
  const Dims4& d = vol.dims();
  if (int(frame_labels.size()) != d.t) throw Error(ErrorKind::LengthMismatch, "one label per frame required");
  std::vector<int> classes;
  for (int l : frame_labels)
    if (l >= 0 && std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
  std::sort(classes.begin(), classes.end());
  if (classes.size() != 2) throw Error(ErrorKind::TooFewSamples, "classification needs exactly two labelled classes");
  const VoxelSeriesSet set = apply_mask(vol, mask);
  std::vector<int> frames, y;
  for (int t = 0; t < d.t; ++t)
    if (frame_labels[std::size_t(t)] >= 0) {
      frames.push_back(t);
      y.push_back(frame_labels[std::size_t(t)] == classes[1] ? 1 : 0);
    }
  Eigen::MatrixXd X(Eigen::Index(frames.size()), set.series.rows());
  for (std::size_t i = 0; i < frames.size(); ++i) X.row(Eigen::Index(i)) = set.series.col(frames[i]).transpose();
  return ct_features(X, y, folds, seed);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["psnr"] = psnr;
  j["ssim"] = ssim ? nlohmann::json(*ssim) : nlohmann::json(nullptr);
  j["fla_residual"] = fla_residual ? pair_json(*fla_residual) : nlohmann::json(nullptr);
  j["fca_residual"] = fca_residual ? pair_json(*fca_residual) : nlohmann::json(nullptr);
  auto ct_json = [](const std::optional<CtResult>& c) {
    return c ? nlohmann::json{{"accuracy", c->accuracy}, {"auc", c->auc}} : nlohmann::json(nullptr);
  };
  j["ct"] = ct_json(ct);
  j["ct_original"] = ct_json(ct_original);
  j["ratio"] = ratio ? nlohmann::json(*ratio) : nlohmann::json(nullptr);
  nlohmann::json sk = nlohmann::json::object();
  for (const auto& [metric, why] : skipped) sk[metric] = why;
  j["skipped"] = sk;
  return j;
}

void validate_report_json(const nlohmann::json& j) {
  auto fail = [](const std::string& field, const std::string& what) {
    throw Error(ErrorKind::Config, "report field '" + field + "' " + what);
  };
  if (!j.is_object()) fail("<root>", "must be an object");
  static const char* kKeys[] = {"psnr", "ssim", "fla_residual", "fca_residual", "ct", "ct_original", "ratio", "skipped"};
  for (const char* k : kKeys)
    if (!j.contains(k)) fail(k, "is missing");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return it.key() == k; }) == std::end(kKeys))
      fail(it.key(), "is not part of the schema");
  if (!j["psnr"].is_number()) fail("psnr", "must be a number");
  for (const char* k : {"ssim", "ratio"})
    if (!j[k].is_null() && !j[k].is_number()) fail(k, "must be a number or null");
  for (const char* k : {"fla_residual", "fca_residual"}) {
    const auto& v = j[k];
    if (v.is_null()) continue;
    if (!v.is_object() || !v.contains("mean") || !v.contains("std") || !v["mean"].is_number() || !v["std"].is_number() ||
        v.size() != 2)
      fail(k, "must be {mean, std} or null");
  }
  for (const char* k : {"ct", "ct_original"}) {
    const auto& v = j[k];
    if (v.is_null()) continue;
    if (!v.is_object() || !v.contains("accuracy") || !v.contains("auc") || !v["accuracy"].is_number() ||
        !v["auc"].is_number() || v.size() != 2)
      fail(k, "must be {accuracy, auc} or null");
  }
  if (!j["skipped"].is_object()) fail("skipped", "must be an object");
  for (const auto& [k, v] : j["skipped"].items())
    if (!v.is_string()) fail("skipped." + k, "must be a string");
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  validate_report_json(j);
  EvalReport r;
  r.psnr = j["psnr"].get<double>();
  if (!j["ssim"].is_null()) r.ssim = j["ssim"].get<double>();
  if (!j["ratio"].is_null()) r.ratio = j["ratio"].get<double>();
  if (!j["fla_residual"].is_null()) r.fla_residual = MeanStd{j["fla_residual"]["mean"], j["fla_residual"]["std"]};
  if (!j["fca_residual"].is_null()) r.fca_residual = MeanStd{j["fca_residual"]["mean"], j["fca_residual"]["std"]};
  if (!j["ct"].is_null()) r.ct = CtResult{j["ct"]["accuracy"], j["ct"]["auc"]};
  if (!j["ct_original"].is_null()) r.ct_original = CtResult{j["ct_original"]["accuracy"], j["ct_original"]["auc"]};
  for (const auto& [k, v] : j["skipped"].items()) r.skipped.emplace_back(k, v.get<std::string>());
  return r;
}

EvalReport evaluate_pair(const Volume4D& original, const Volume4D& decompressed, const EvalContext& ctx) {
  same_dims(original, decompressed);
  const Dims4& d = original.dims();
  const Mask3D mask = ctx.mask ? *ctx.mask : Mask3D::full(d.spatial());
  EvalReport r;
  r.psnr = psnr(original, decompressed, &mask);
  if (d.w >= 11 && d.h >= 11) r.ssim = ssim_volume(original, decompressed);
  else r.skipped.emplace_back("ssim", "slices smaller than the 11x11 window");

  if (ctx.stimulus) {
    const TMap a = fla(original, *ctx.stimulus, ctx.hrf, mask);
    const TMap b = fla(decompressed, *ctx.stimulus, ctx.hrf, mask);
    r.fla_residual = fla_residual(a, b, mask);
  } else {
    r.skipped.emplace_back("fla", "no stimulus table");
  }
  if (ctx.atlas) r.fca_residual = fca_residual(fca(original, *ctx.atlas), fca(decompressed, *ctx.atlas));
  else r.skipped.emplace_back("fca", "no atlas");
  if (ctx.frame_labels) {
    try {
      r.ct = ct(decompressed, mask, *ctx.frame_labels, ctx.folds, ctx.seed);
      r.ct_original = ct(original, mask, *ctx.frame_labels, ctx.folds, ctx.seed);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::TooFewSamples) throw;
      r.ct.reset();
      r.skipped.emplace_back("ct", e.what());
    }
  } else {
    r.skipped.emplace_back("ct", "no frame labels");
  }
  r.ratio = ctx.ratio;
  return r;
}

}  // namespace icnr
