#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace icnr {

struct SvmOptions {
  double C = 1.0;
  double tol = 0.1;
  int max_passes = 1000;
  std::uint64_t seed = 0;
};

// L2-regularised hinge-loss linear classifier, dual coordinate descent.
// A constant bias feature is appended internally.
class LinearSvm {
 public:
  // X: samples x features, y in {-1, +1}.
  void fit(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmOptions& opts = {});
  Eigen::VectorXd decision(const Eigen::MatrixXd& X) const;

  const Eigen::VectorXd& weights() const { return w_; }
  double bias() const { return b_; }
  int passes() const { return passes_; }

 private:
  Eigen::VectorXd w_;
  double b_ = 0.0;
  int passes_ = 0;
};

// Area under the ROC curve via the rank statistic; ties count one half.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& positive);

}  // namespace icnr
