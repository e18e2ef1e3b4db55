#pragma once

#include <Eigen/Dense>

#include "icnr/synth.hpp"

namespace icnr {

constexpr double kTCap = 1e6;

// Columns: one HRF-convolved regressor per stimulus, intercept, centred linear drift.
Eigen::MatrixXd design_matrix(const StimulusSpec& stim, const HrfParams& hrf);

// OLS fit of many series against one design.
class Glm {
 public:
  explicit Glm(Eigen::MatrixXd design);

  int dof() const { return int(x_.rows() - x_.cols()); }
  const Eigen::MatrixXd& design() const { return x_; }

  Eigen::VectorXd beta(const Eigen::VectorXd& y) const;
  // t statistic of beta(contrast), clamped to +-kTCap.
  double t_value(const Eigen::VectorXd& y, int contrast) const;

 private:
  Eigen::MatrixXd x_;
  Eigen::MatrixXd pinv_;     // (X^T X)^-1 X^T
  Eigen::MatrixXd xtx_inv_;
};

}  // namespace icnr
