#pragma once

#include <Eigen/Dense>

namespace icnr {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 0.0;  // <= 0: range of the reference image (1 when flat)
};

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
Eigen::VectorXd gaussian_taps(int size, double sigma);

// Largest odd size <= min(rows, cols, preferred).
int fitted_window(Eigen::Index rows, Eigen::Index cols, int preferred = 11);

// Mean SSIM over all valid window positions, `a` is the reference.
// Throws TooSmall when an edge is shorter than the window, ShapeMismatch on differing shapes.
double ssim2d(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SsimOptions& opts = {});

// Same value; also writes d SSIM / d b into grad_b.
double ssim2d_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SsimOptions& opts,
                   Eigen::MatrixXd& grad_b);

}  // namespace icnr
