#include "icnr/nn.hpp"

#include <cmath>
#include <numbers>

namespace icnr::nn {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void activate(Activation act, const Matrix& pre, Matrix& out) {
  if (act == Activation::Identity) {
    out = pre;
    return;
  }
  out.resize(pre.rows(), pre.cols());
  const double* p = pre.data();
  double* o = out.data();
  for (Eigen::Index i = 0; i < pre.size(); ++i) o[i] = gelu(p[i]);
}

void activate_backward(Activation act, const Matrix& pre, Matrix& grad) {
  if (act == Activation::Identity) return;
  const double* p = pre.data();
  double* g = grad.data();
  for (Eigen::Index i = 0; i < pre.size(); ++i) g[i] *= gelu_grad(p[i]);
}

void conv1d_forward(const Conv1d& conv, const ConstMatMap& weight, const double* bias, const Matrix& in,
                    int batch, int in_len, Matrix& cols, Matrix& out) {
  const int out_len = conv.out_len(in_len);
  const int pad = conv.kernel / 2;
  const Eigen::Index ncols = Eigen::Index(batch) * out_len;
  cols.setZero(Eigen::Index(conv.in_ch) * conv.kernel, ncols);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const Eigen::Index col = Eigen::Index(b) * out_len + j;
      double* dst = cols.col(col).data();
      for (int k = 0; k < conv.kernel; ++k) {
        const int t = conv.stride * j + k - pad;
        if (t < 0 || t >= in_len) continue;
        const Eigen::Index src_col = Eigen::Index(b) * in_len + t;
        const double* src = in.col(src_col).data();
        for (int ci = 0; ci < conv.in_ch; ++ci) dst[ci * conv.kernel + k] = src[ci];
      }
    }
  }
  out.noalias() = weight * cols;
  if (bias) {
    const Eigen::Map<const Eigen::VectorXd> b(bias, conv.out_ch);
    out.colwise() += b;
  }
}

void conv1d_backward(const Conv1d& conv, const ConstMatMap& weight, const Matrix& cols, const Matrix& grad_out,
                     int batch, int in_len, MatMap grad_weight, double* grad_bias, Matrix* grad_in) {
  grad_weight.noalias() += grad_out * cols.transpose();
  if (grad_bias) {
    Eigen::Map<Eigen::VectorXd> gb(grad_bias, conv.out_ch);
    gb += grad_out.rowwise().sum();
  }
  if (!grad_in) return;
  const int out_len = conv.out_len(in_len);
  const int pad = conv.kernel / 2;
  const Matrix grad_cols = weight.transpose() * grad_out;
  grad_in->setZero(conv.in_ch, Eigen::Index(batch) * in_len);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const double* src = grad_cols.col(Eigen::Index(b) * out_len + j).data();
      for (int k = 0; k < conv.kernel; ++k) {
        const int t = conv.stride * j + k - pad;
        if (t < 0 || t >= in_len) continue;
        double* dst = grad_in->col(Eigen::Index(b) * in_len + t).data();
        for (int ci = 0; ci < conv.in_ch; ++ci) dst[ci] += src[ci * conv.kernel + k];
      }
    }
  }
}

void upsample2(const Matrix& in, int batch, int len, Matrix& out) {
  out.resize(in.rows(), Eigen::Index(batch) * len * 2);
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < len; ++t) {
      const Eigen::Index src = Eigen::Index(b) * len + t;
      const Eigen::Index dst = Eigen::Index(b) * len * 2 + 2 * t;
      out.col(dst) = in.col(src);
      out.col(dst + 1) = in.col(src);
    }
}

void upsample2_backward(const Matrix& grad_out, int batch, int len, Matrix& grad_in) {
  grad_in.resize(grad_out.rows(), Eigen::Index(batch) * len);
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < len; ++t) {
      const Eigen::Index src = Eigen::Index(b) * len * 2 + 2 * t;
      grad_in.col(Eigen::Index(b) * len + t) = grad_out.col(src) + grad_out.col(src + 1);
    }
}

}  // namespace icnr::nn
