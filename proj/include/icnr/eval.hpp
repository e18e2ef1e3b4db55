#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "icnr/synth.hpp"
#include "icnr/volume.hpp"

namespace icnr {

constexpr double kPsnrCap = 300.0;

// In-mask PSNR; peak <= 0 uses the in-mask range of `a`.
double psnr(const Volume4D& a, const Volume4D& b, const Mask3D* mask = nullptr, double peak = 0.0);

// Mean SSIM over all (x, y) slices for every z and t; L is the range of `a`.
double ssim_volume(const Volume4D& a, const Volume4D& b);

struct TMap {
  Dims3 dims;
  std::vector<float> t;  // NaN outside the mask
  int dof = 0;
  int contrast = 0;
};

TMap fla(const Volume4D& vol, const StimulusSpec& stim, const HrfParams& hrf, const Mask3D& mask, int contrast = 0);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd fla_residual(const TMap& a, const TMap& b, const Mask3D& mask);

struct ConnectivityMatrix {
  Eigen::MatrixXd r;
  std::vector<int> region_ids;
};

// Regions are labels 0..R-1 (negative = unassigned); a missing label is EmptyRegion.
ConnectivityMatrix fca(const Volume4D& vol, const LabelVolume& atlas);
MeanStd fca_residual(const ConnectivityMatrix& a, const ConnectivityMatrix& b);

struct CtResult {
  double accuracy = 0.0;
  double auc = 0.0;
};

// samples x features, labels in {0, 1}. Stratified k-fold, per-fold standardization.
CtResult ct_features(const Eigen::MatrixXd& X, const std::vector<int>& labels, int folds = 10, std::uint64_t seed = 0);
// Frame labels: two distinct non-negative classes, negative frames ignored.
CtResult ct(const Volume4D& vol, const Mask3D& mask, const std::vector<int>& frame_labels, int folds = 10,
            std::uint64_t seed = 0);

struct EvalContext {
  std::optional<Mask3D> mask;
  std::optional<StimulusSpec> stimulus;
  HrfParams hrf;
  std::optional<LabelVolume> atlas;
  std::optional<std::vector<int>> frame_labels;
  std::optional<double> ratio;
  int folds = 10;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double psnr = 0.0;
  std::optional<double> ssim;
  std::optional<MeanStd> fla_residual;
  std::optional<MeanStd> fca_residual;
  std::optional<CtResult> ct;          // on the decompressed volume
  std::optional<CtResult> ct_original;
  std::optional<double> ratio;
  std::vector<std::pair<std::string, std::string>> skipped;  // metric, reason

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Throws Error(Config) naming the first offending field.
void validate_report_json(const nlohmann::json& j);

EvalReport evaluate_pair(const Volume4D& original, const Volume4D& decompressed, const EvalContext& ctx);

}  // namespace icnr
