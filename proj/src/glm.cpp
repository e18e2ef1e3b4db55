#include "icnr/glm.hpp"

#include <algorithm>
#include <cmath>

#include "icnr/error.hpp"

namespace icnr {

Eigen::MatrixXd design_matrix(const StimulusSpec& stim, const HrfParams& hrf) {
  const Eigen::MatrixXd reg = hrf_convolve(stim, hrf);  // K_s x T
  const int T = stim.T;
  Eigen::MatrixXd x(T, reg.rows() + 2);
  x.leftCols(reg.rows()) = reg.transpose();
  x.col(reg.rows()).setOnes();
  for (int t = 0; t < T; ++t) x(t, reg.rows() + 1) = (t - (T - 1) / 2.0) / double(std::max(T, 1));
  return x;
}

Glm::Glm(Eigen::MatrixXd design) : x_(std::move(design)) {
  const Eigen::Index p = x_.cols();
  if (x_.rows() < p + 1) {
    throw Error(ErrorKind::SingularDesign, "need at least " + std::to_string(p + 1) + " frames for " +
                                               std::to_string(p) + " regressors");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x_);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw Error(ErrorKind::SingularDesign, "design matrix is rank deficient");
  const Eigen::MatrixXd xtx = x_.transpose() * x_;
  xtx_inv_ = xtx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  pinv_ = xtx_inv_ * x_.transpose();
}

Eigen::VectorXd Glm::beta(const Eigen::VectorXd& y) const { return pinv_ * y; }

double Glm::t_value(const Eigen::VectorXd& y, int contrast) const {
  if (contrast < 0 || contrast >= x_.cols()) throw Error(ErrorKind::Config, "contrast index out of range");
  const Eigen::VectorXd b = beta(y);
  const double rss = (y - x_ * b).squaredNorm();
  const double se = std::sqrt(std::max(rss, 0.0) / dof() * xtx_inv_(contrast, contrast));
  const double bc = b(contrast);
  double t;
  if (se > 0) t = bc / se;
  else t = bc == 0 ? 0.0 : std::copysign(kTCap, bc);
  return std::clamp(t, -kTCap, kTCap);
}

}  // namespace icnr
