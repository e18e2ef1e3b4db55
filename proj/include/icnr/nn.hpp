#pragma once

#include <cstdint>

#include <Eigen/Dense>

// Layer kernels with explicit backward passes. Batched 1-D activations are
// stored as (channels x batch*length) matrices, column index b*length + t.
namespace icnr::nn {

using Matrix = Eigen::MatrixXd;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;

enum class Activation : std::uint8_t { Gelu = 0, Identity = 1 };

double gelu(double x);
double gelu_grad(double x);

void activate(Activation act, const Matrix& pre, Matrix& out);
// grad <- grad * act'(pre), elementwise.
void activate_backward(Activation act, const Matrix& pre, Matrix& grad);

struct Conv1d {
  int in_ch = 1;
  int out_ch = 1;
  int kernel = 3;
  int stride = 1;

  int out_len(int in_len) const { return (in_len + 2 * (kernel / 2) - kernel) / stride + 1; }
  Eigen::Index weight_count() const { return Eigen::Index(out_ch) * in_ch * kernel; }
};

// Zero "same" padding of kernel/2 on both sides. W is out_ch x (in_ch*kernel),
// column ci*kernel + k. `cols` receives the im2col buffer needed by backward.
void conv1d_forward(const Conv1d& conv, const ConstMatMap& weight, const double* bias, const Matrix& in,
                    int batch, int in_len, Matrix& cols, Matrix& out);

// Accumulates into grad_weight / grad_bias; writes grad_in when non-null.
void conv1d_backward(const Conv1d& conv, const ConstMatMap& weight, const Matrix& cols, const Matrix& grad_out,
                     int batch, int in_len, MatMap grad_weight, double* grad_bias, Matrix* grad_in);

// Nearest-neighbour 2x temporal upsampling and its adjoint.
void upsample2(const Matrix& in, int batch, int len, Matrix& out);
void upsample2_backward(const Matrix& grad_out, int batch, int len, Matrix& grad_in);

}  // namespace icnr::nn
