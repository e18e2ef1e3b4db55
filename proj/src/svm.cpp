#include "icnr/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icnr/error.hpp"
#include "icnr/rng.hpp"

namespace icnr {

void LinearSvm::fit(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmOptions& opts) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (Eigen::Index(y.size()) != n) throw Error(ErrorKind::ShapeMismatch, "label count differs from sample count");
  Eigen::MatrixXd Xb(n, d + 1);
  Xb.leftCols(d) = X;
  Xb.col(d).setOnes();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd qd = Xb.rowwise().squaredNorm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(opts.seed);

  passes_ = 0;
  for (int pass = 0; pass < opts.max_passes; ++pass) {
    rng.shuffle(order);
    double pg_max = -std::numeric_limits<double>::infinity(), pg_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index i : order) {
      const double yi = y[std::size_t(i)] > 0 ? 1.0 : -1.0;
      const double g = yi * Xb.row(i).dot(w) - 1.0;
      double pg = g;
      if (alpha(i) == 0) pg = std::min(g, 0.0);
      else if (alpha(i) == opts.C) pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg != 0 && qd(i) > 0) {
        const double old = alpha(i);
        alpha(i) = std::clamp(old - g / qd(i), 0.0, opts.C);
        w += (alpha(i) - old) * yi * Xb.row(i).transpose();
      }
    }
    passes_ = pass + 1;
    if (pg_max - pg_min < opts.tol) break;
  }
  w_ = w.head(d);
  b_ = w(d);
}

Eigen::VectorXd LinearSvm::decision(const Eigen::MatrixXd& X) const { return (X * w_).array() + b_; }

double roc_auc(const std::vector<double>& scores, const std::vector<int>& positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = (double(i) + double(j - 1)) / 2.0 + 1.0;
    for (std::size_t k = i; k < j; ++k)
      if (positive[idx[k]]) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  return (rank_sum - double(n_pos) * double(n_pos + 1) / 2.0) / (double(n_pos) * double(n_neg));
}

}  // namespace icnr
