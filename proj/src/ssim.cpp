#include "icnr/ssim.hpp"

#include <algorithm>
#include <cmath>

#include "icnr/error.hpp"

namespace icnr {

namespace {

// Separable "valid" correlation.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const Eigen::VectorXd& g) {
  const Eigen::Index n = g.size();
  const Eigen::Index R = img.rows() - n + 1, C = img.cols() - n + 1;
  Eigen::MatrixXd rows_done(R, img.cols());
  for (Eigen::Index i = 0; i < R; ++i) rows_done.row(i) = g.transpose() * img.middleRows(i, n);
  Eigen::MatrixXd out(R, C);
  for (Eigen::Index j = 0; j < C; ++j) out.col(j) = rows_done.middleCols(j, n) * g;
  return out;
}

// Adjoint of filter_valid: scatter a (R x C) map back onto the (R+n-1 x C+n-1) grid.
Eigen::MatrixXd filter_adjoint(const Eigen::MatrixXd& m, const Eigen::VectorXd& g) {
  const Eigen::Index n = g.size();
  Eigen::MatrixXd cols_done = Eigen::MatrixXd::Zero(m.rows(), m.cols() + n - 1);
  for (Eigen::Index j = 0; j < m.cols(); ++j) cols_done.middleCols(j, n) += m.col(j) * g.transpose();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows() + n - 1, cols_done.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.middleRows(i, n) += g * cols_done.row(i);
  return out;
}

struct SsimMaps {
  Eigen::ArrayXXd mu_a, mu_b, s_aa, s_bb, s_ab;
  double c1 = 0, c2 = 0;
};

SsimMaps moments(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SsimOptions& opts,
                 const Eigen::VectorXd& g) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::ShapeMismatch, "SSIM inputs differ in shape");
  if (opts.window < 1 || opts.window % 2 == 0) throw Error(ErrorKind::Config, "SSIM window must be odd");
  if (a.rows() < opts.window || a.cols() < opts.window) {
    throw Error(ErrorKind::TooSmall, "image " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                         " smaller than the " + std::to_string(opts.window) + "-wide window");
  }
  double L = opts.data_range;
  if (!(L > 0)) L = a.maxCoeff() - a.minCoeff();
  if (!(L > 0)) L = 1.0;
  SsimMaps m;
  m.c1 = (opts.k1 * L) * (opts.k1 * L);
  m.c2 = (opts.k2 * L) * (opts.k2 * L);
  m.mu_a = filter_valid(a, g).array();
  m.mu_b = filter_valid(b, g).array();
  m.s_aa = filter_valid(a.cwiseProduct(a), g).array() - m.mu_a.square();
  m.s_bb = filter_valid(b.cwiseProduct(b), g).array() - m.mu_b.square();
  m.s_ab = filter_valid(a.cwiseProduct(b), g).array() - m.mu_a * m.mu_b;
  return m;
}

}  // namespace

Eigen::VectorXd gaussian_taps(int size, double sigma) {
  Eigen::VectorXd g(size);
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) g(i) = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
  return g / g.sum();
}

int fitted_window(Eigen::Index rows, Eigen::Index cols, int preferred) {
  int w = int(std::min<Eigen::Index>({rows, cols, Eigen::Index(preferred)}));
  if (w % 2 == 0) --w;
  return std::max(w, 1);
}

double ssim2d(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SsimOptions& opts) {
  const Eigen::VectorXd g = gaussian_taps(opts.window, opts.sigma);
  const SsimMaps m = moments(a, b, opts, g);
  const Eigen::ArrayXXd num = (2 * m.mu_a * m.mu_b + m.c1) * (2 * m.s_ab + m.c2);
  const Eigen::ArrayXXd den = (m.mu_a.square() + m.mu_b.square() + m.c1) * (m.s_aa + m.s_bb + m.c2);
  return (num / den).mean();
}

double ssim2d_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SsimOptions& opts,
                   Eigen::MatrixXd& grad_b) {
  const Eigen::VectorXd g = gaussian_taps(opts.window, opts.sigma);
  const SsimMaps m = moments(a, b, opts, g);
  const Eigen::ArrayXXd A1 = 2 * m.mu_a * m.mu_b + m.c1;
  const Eigen::ArrayXXd A2 = 2 * m.s_ab + m.c2;
  const Eigen::ArrayXXd B1 = m.mu_a.square() + m.mu_b.square() + m.c1;
  const Eigen::ArrayXXd B2 = m.s_aa + m.s_bb + m.c2;
  const Eigen::ArrayXXd S = A1 * A2 / (B1 * B2);
  const double P = double(S.size());

  // Partials with respect to mu_b, E[b^2] and E[ab] at each window position.
  const Eigen::ArrayXXd d_mu = (2 * m.mu_a * A2 - 2 * m.mu_a * A1) / (B1 * B2) - S * (2 * m.mu_b / B1 - 2 * m.mu_b / B2);
  const Eigen::ArrayXXd d_bb = -S / B2;
  const Eigen::ArrayXXd d_ab = 2 * A1 / (B1 * B2);

  grad_b = (filter_adjoint(d_mu.matrix(), g).array() + 2 * b.array() * filter_adjoint(d_bb.matrix(), g).array() +
            a.array() * filter_adjoint(d_ab.matrix(), g).array())
               .matrix() /
           P;
  return S.mean();
}

}  // namespace icnr
