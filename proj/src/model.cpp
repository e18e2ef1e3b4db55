#include "icnr/model.hpp"

#include <cmath>
#include <numbers>

#include "icnr/error.hpp"
#include "icnr/rng.hpp"

namespace icnr {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw Error(ErrorKind::Config, std::string("model.") + name + " must be >= 1");
  };
  positive(K, "K");
  positive(T, "T");
  positive(embed_freqs, "embed_freqs");
  positive(mlp_layers, "mlp_layers");
  positive(mlp_width, "mlp_width");
  positive(feat_channels, "feat_channels");
  positive(fusion_levels, "fusion_levels");
  positive(fusion_width, "fusion_width");
}

int ModelConfig::padded_T() const {
  if (!fusion) return T;
  const int m = 1 << fusion_levels;
  return (T + m - 1) / m * m;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t K = std::size_t(cfg.K), T = std::size_t(cfg.T), W = std::size_t(cfg.mlp_width);
  std::size_t n = K * T;
  std::size_t in = std::size_t(cfg.embed_dim());
  for (int l = 0; l < cfg.mlp_layers; ++l) {
    const std::size_t out = (l + 1 == cfg.mlp_layers) ? 1 : W;
    n += K * (in * out + out);
    in = out;
  }
  if (!cfg.fusion) return n;
  const std::size_t C = std::size_t(cfg.feat_channels), F = std::size_t(cfg.fusion_width);
  const std::size_t KC = K * C, L = std::size_t(cfg.fusion_levels);
  n += K * (3 * C + C) + K * (3 * C * C + C);
  n += (3 * KC * F + F) + (L - 1) * (3 * F * F + F);
  n += (3 * F * F + F) + (L - 1) * (6 * F * F + F);
  n += 3 * (F + KC) + 1;
  return n;
}

Eigen::VectorXd embed_coords(const Eigen::Vector3d& v, int L) {
  Eigen::VectorXd out(6 * L);
  for (int a = 0; a < 3; ++a) {
    for (int l = 0; l < L; ++l) {
      const double arg = std::ldexp(1.0, l) * std::numbers::pi * v(a);
      out(a * 2 * L + 2 * l) = std::sin(arg);
      out(a * 2 * L + 2 * l + 1) = std::cos(arg);
    }
  }
  return out;
}

Eigen::MatrixXd embed_batch(const Eigen::MatrixXd& coords, int L) {
  Eigen::MatrixXd out(6 * L, coords.rows());
  for (Eigen::Index b = 0; b < coords.rows(); ++b) out.col(b) = embed_coords(coords.row(b).transpose(), L);
  return out;
}

Eigen::Vector3d normalize_coord(const Coord& c, const Dims3& dims) {
  const std::array<int, 3> extent{dims.w, dims.h, dims.d};
  Eigen::Vector3d v;
  // Voxel centres, so the two edges never land on +-1 where the embedding's period-2 terms coincide.
  for (int a = 0; a < 3; ++a) v(a) = (2.0 * c[a] + 1.0) / double(extent[a]) - 1.0;
  return v;
}

Eigen::MatrixXd normalized_coords(const std::vector<Coord>& coords, const Dims3& dims) {
  Eigen::MatrixXd out(Eigen::Index(coords.size()), 3);
  for (std::size_t i = 0; i < coords.size(); ++i) out.row(Eigen::Index(i)) = normalize_coord(coords[i], dims).transpose();
  return out;
}

Eigen::MatrixXd channel_attention(const Eigen::VectorXd& w, const Eigen::MatrixXd& features, int channels_per_pattern) {
  if (features.rows() != w.size() * channels_per_pattern) {
    throw Error(ErrorKind::ShapeMismatch, "feature rows do not equal K * C");
  }
  Eigen::MatrixXd out = features;
  for (Eigen::Index k = 0; k < w.size(); ++k) out.middleRows(k * channels_per_pattern, channels_per_pattern) *= w(k);
  return out;
}

// ---------------------------------------------------------------------------

InrModel::InrModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const int K = cfg_.K;
  bank_offset_ = add_tensor("bank", {K, cfg_.T});

  int in = cfg_.embed_dim();
  for (int l = 0; l < cfg_.mlp_layers; ++l) {
    const int out = (l + 1 == cfg_.mlp_layers) ? 1 : cfg_.mlp_width;
    Layer layer;
    layer.in = in;
    layer.out = out;
    layer.w = add_tensor("mlp." + std::to_string(l) + ".weight", {K, out, in});
    layer.b = add_tensor("mlp." + std::to_string(l) + ".bias", {K, out});
    mlp_.push_back(layer);
    in = out;
  }

  fusion_begin_ = params_.size();
  if (cfg_.fusion) {
    const int C = cfg_.feat_channels, F = cfg_.fusion_width, KC = cfg_.feature_channels();
    enc1_.conv = {1, C, 3, 1};
    enc1_.w = add_tensor("enc.0.weight", {K, C, 1 * 3});
    enc1_.b = add_tensor("enc.0.bias", {K, C});
    enc2_.conv = {C, C, 3, 1};
    enc2_.w = add_tensor("enc.1.weight", {K, C, C * 3});
    enc2_.b = add_tensor("enc.1.bias", {K, C});
    fusion_begin_ = params_.size();
    for (int l = 1; l <= cfg_.fusion_levels; ++l) {
      ConvLayer d;
      d.conv = {l == 1 ? KC : F, F, 3, 2};
      d.w = add_tensor("down." + std::to_string(l) + ".weight", {F, d.conv.in_ch * 3});
      d.b = add_tensor("down." + std::to_string(l) + ".bias", {F});
      down_.push_back(d);
    }
    up_.resize(std::size_t(cfg_.fusion_levels));
    for (int l = cfg_.fusion_levels; l >= 1; --l) {
      ConvLayer u;
      u.conv = {l == cfg_.fusion_levels ? F : 2 * F, F, 3, 1};
      u.w = add_tensor("up." + std::to_string(l) + ".weight", {F, u.conv.in_ch * 3});
      u.b = add_tensor("up." + std::to_string(l) + ".bias", {F});
      up_[std::size_t(l - 1)] = u;
    }
    final_.conv = {F + KC, 1, 3, 1};
    final_.w = add_tensor("final.weight", {1, final_.conv.in_ch * 3});
    final_.b = add_tensor("final.bias", {1});
  }

  Rng rng(seed);
  const double sqrt3 = std::sqrt(3.0);
  init_uniform(bank_offset_, Eigen::Index(K) * cfg_.T, sqrt3, rng);
  for (const Layer& layer : mlp_) {
    const double bound = 1.0 / std::sqrt(double(layer.in));
    init_uniform(layer.w, Eigen::Index(K) * layer.out * layer.in, bound, rng);
    init_uniform(layer.b, Eigen::Index(K) * layer.out, bound, rng);
  }
  if (cfg_.fusion) {
    auto init_conv = [&](const ConvLayer& c, int stacks) {
      const double bound = 1.0 / std::sqrt(double(c.conv.in_ch * c.conv.kernel));
      init_uniform(c.w, c.conv.weight_count() * stacks, bound, rng);
      init_uniform(c.b, Eigen::Index(c.conv.out_ch) * stacks, bound, rng);
    };
    init_conv(enc1_, K);
    init_conv(enc2_, K);
    for (const ConvLayer& d : down_) init_conv(d, 1);
    for (int l = cfg_.fusion_levels; l >= 1; --l) init_conv(up_[std::size_t(l - 1)], 1);
    if (cfg_.zero_init_output) {
      params_.segment(final_.w, final_.conv.weight_count()).setZero();
      params_(final_.b) = 0.0;
    } else {
      init_conv(final_, 1);
    }
  }
  if (std::size_t(params_.size()) != icnr::parameter_count(cfg_)) {
    throw Error(ErrorKind::ShapeMismatch, "parameter layout disagrees with the closed-form count");
  }
}

Eigen::Index InrModel::add_tensor(const std::string& name, std::vector<int> shape) {
  Eigen::Index size = 1;
  for (int s : shape) size *= s;
  TensorInfo info{name, std::move(shape), params_.size(), size};
  tensors_.push_back(info);
  params_.conservativeResize(params_.size() + size);
  params_.tail(size).setZero();
  return info.offset;
}

void InrModel::init_uniform(Eigen::Index offset, Eigen::Index size, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < size; ++i) params_(offset + i) = rng.uniform(-bound, bound);
}

const TensorInfo& InrModel::tensor(const std::string& name) const {
  for (const TensorInfo& t : tensors_)
    if (t.name == name) return t;
  throw Error(ErrorKind::ShapeMismatch, "no tensor named " + name);
}

Eigen::Map<Eigen::MatrixXd> InrModel::bank() {
  return Eigen::Map<Eigen::MatrixXd>(params_.data() + bank_offset_, cfg_.K, cfg_.T);
}

Eigen::Map<const Eigen::MatrixXd> InrModel::bank() const {
  return Eigen::Map<const Eigen::MatrixXd>(params_.data() + bank_offset_, cfg_.K, cfg_.T);
}

void InrModel::set_bank(const Eigen::MatrixXd& patterns) {
  if (patterns.rows() != cfg_.K) throw Error(ErrorKind::KMismatch, "pattern count differs from model K");
  if (patterns.cols() != cfg_.T) throw Error(ErrorKind::LengthMismatch, "pattern length differs from model T");
  bank() = patterns;
}

std::pair<Eigen::Index, Eigen::Index> InrModel::weight_field_range() const {
  const TensorInfo& first = tensor("mlp.0.weight");
  const TensorInfo& last = tensor("mlp." + std::to_string(cfg_.mlp_layers - 1) + ".bias");
  return {first.offset, last.offset + last.size};
}

std::pair<Eigen::Index, Eigen::Index> InrModel::fusion_range() const { return {fusion_begin_, params_.size()}; }

// --- weight fields ---------------------------------------------------------

const Eigen::MatrixXd& InrModel::forward_weights(const Eigen::MatrixXd& embedded, WeightWorkspace& ws) const {
  if (embedded.rows() != cfg_.embed_dim()) throw Error(ErrorKind::ShapeMismatch, "embedding width mismatch");
  const int K = cfg_.K;
  const Eigen::Index B = embedded.cols();
  ws.input = &embedded;
  ws.pre.resize(std::size_t(K));
  ws.act.resize(std::size_t(K));
  ws.out.resize(K, B);
  for (int k = 0; k < K; ++k) {
    auto& pre = ws.pre[std::size_t(k)];
    auto& act = ws.act[std::size_t(k)];
    pre.resize(mlp_.size());
    act.resize(mlp_.size());
    const nn::Matrix* x = &embedded;
    for (std::size_t l = 0; l < mlp_.size(); ++l) {
      const Layer& layer = mlp_[l];
      const auto w = weight_map(layer.w + Eigen::Index(k) * layer.out * layer.in, layer.out, layer.in);
      const Eigen::Map<const Eigen::VectorXd> b(params_.data() + layer.b + Eigen::Index(k) * layer.out, layer.out);
      pre[l].noalias() = w * (*x);
      pre[l].colwise() += b;
      if (l + 1 == mlp_.size()) act[l] = pre[l];
      else nn::activate(nn::Activation::Gelu, pre[l], act[l]);
      x = &act[l];
    }
    ws.out.row(k) = act.back().row(0);
  }
  return ws.out;
}

void InrModel::backward_weights(const WeightWorkspace& ws, const Eigen::MatrixXd& grad_w, Eigen::VectorXd& grad) const {
  const int K = cfg_.K;
  for (int k = 0; k < K; ++k) {
    const auto& pre = ws.pre[std::size_t(k)];
    const auto& act = ws.act[std::size_t(k)];
    nn::Matrix g = grad_w.row(k);
    for (std::size_t li = mlp_.size(); li-- > 0;) {
      const Layer& layer = mlp_[li];
      if (li + 1 != mlp_.size()) nn::activate_backward(nn::Activation::Gelu, pre[li], g);
      const nn::Matrix& x = li == 0 ? *ws.input : act[li - 1];
      nn::MatMap gw(grad.data() + layer.w + Eigen::Index(k) * layer.out * layer.in, layer.out, layer.in);
      gw.noalias() += g * x.transpose();
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + layer.b + Eigen::Index(k) * layer.out, layer.out);
      gb += g.rowwise().sum();
      if (li > 0) {
        const auto w = weight_map(layer.w + Eigen::Index(k) * layer.out * layer.in, layer.out, layer.in);
        g = w.transpose() * g;
      }
    }
  }
}

Eigen::MatrixXd InrModel::predict_weights(const Eigen::MatrixXd& embedded) const {
  WeightWorkspace ws;
  return forward_weights(embedded, ws);
}

// --- pattern encoders -------------------------------------------------------

void InrModel::encoder_forward(EncoderWorkspace& ws) const {
  const int K = cfg_.K, C = cfg_.feat_channels, T = cfg_.T;
  ws.cols1.resize(std::size_t(K));
  ws.pre1.resize(std::size_t(K));
  ws.act1.resize(std::size_t(K));
  ws.cols2.resize(std::size_t(K));
  ws.features.resize(Eigen::Index(K) * C, T);
  const auto bank_rows = bank();
  for (int k = 0; k < K; ++k) {
    const nn::Matrix row = bank_rows.row(k);
    const auto w1 = weight_map(enc1_.w + enc1_.conv.weight_count() * k, C, 3);
    nn::conv1d_forward(enc1_.conv, w1, params_.data() + enc1_.b + Eigen::Index(k) * C, row, 1, T,
                       ws.cols1[std::size_t(k)], ws.pre1[std::size_t(k)]);
    nn::activate(cfg_.encoder_activation, ws.pre1[std::size_t(k)], ws.act1[std::size_t(k)]);
    const auto w2 = weight_map(enc2_.w + enc2_.conv.weight_count() * k, C, C * 3);
    nn::Matrix out;
    nn::conv1d_forward(enc2_.conv, w2, params_.data() + enc2_.b + Eigen::Index(k) * C, ws.act1[std::size_t(k)], 1, T,
                       ws.cols2[std::size_t(k)], out);
    ws.features.middleRows(Eigen::Index(k) * C, C) = out;
  }
}

void InrModel::encoder_backward(EncoderWorkspace& ws, const Eigen::MatrixXd& grad_features, Eigen::VectorXd& grad) const {
  const int K = cfg_.K, C = cfg_.feat_channels, T = cfg_.T;
  nn::MatMap grad_bank(grad.data() + bank_offset_, K, T);
  for (int k = 0; k < K; ++k) {
    const nn::Matrix g_out = grad_features.middleRows(Eigen::Index(k) * C, C);
    const auto w2 = weight_map(enc2_.w + enc2_.conv.weight_count() * k, C, C * 3);
    nn::Matrix g_act;
    nn::conv1d_backward(enc2_.conv, w2, ws.cols2[std::size_t(k)], g_out, 1, T,
                        nn::MatMap(grad.data() + enc2_.w + enc2_.conv.weight_count() * k, C, C * 3),
                        grad.data() + enc2_.b + Eigen::Index(k) * C, &g_act);
    nn::activate_backward(cfg_.encoder_activation, ws.pre1[std::size_t(k)], g_act);
    const auto w1 = weight_map(enc1_.w + enc1_.conv.weight_count() * k, C, 3);
    nn::Matrix g_row;
    nn::conv1d_backward(enc1_.conv, w1, ws.cols1[std::size_t(k)], g_act, 1, T,
                        nn::MatMap(grad.data() + enc1_.w + enc1_.conv.weight_count() * k, C, 3),
                        grad.data() + enc1_.b + Eigen::Index(k) * C, &g_row);
    grad_bank.row(k) += g_row.row(0);
  }
}

Eigen::MatrixXd InrModel::pattern_features() const {
  if (!cfg_.fusion) return bank();
  EncoderWorkspace ws;
  encoder_forward(ws);
  return ws.features;
}

Eigen::MatrixXd InrModel::modulate(const Eigen::MatrixXd& w, const Eigen::MatrixXd& features) const {
  const int C = cfg_.feat_channels, T = cfg_.T, Tp = cfg_.padded_T();
  const Eigen::Index B = w.cols();
  Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(features.rows(), B * Tp);
  for (Eigen::Index b = 0; b < B; ++b)
    for (int k = 0; k < cfg_.K; ++k)
      x0.block(Eigen::Index(k) * C, b * Tp, C, T) = w(k, b) * features.middleRows(Eigen::Index(k) * C, C);
  return x0;
}

// --- fusion -----------------------------------------------------------------

const Eigen::MatrixXd& InrModel::fuse(const Eigen::MatrixXd& modulated, int batch, FusionWorkspace& ws) const {
  const int Tp = cfg_.padded_T(), T = cfg_.T, F = cfg_.fusion_width, L = cfg_.fusion_levels;
  if (modulated.rows() != cfg_.feature_channels() || modulated.cols() != Eigen::Index(batch) * Tp) {
    throw Error(ErrorKind::ShapeMismatch, "fusion input must be KC x B*T_pad");
  }
  ws.batch = batch;
  ws.input = modulated;
  ws.down_cols.resize(std::size_t(L));
  ws.down_pre.resize(std::size_t(L));
  ws.down_act.resize(std::size_t(L));
  ws.up_in.resize(std::size_t(L));
  ws.up_cols.resize(std::size_t(L));
  ws.up_pre.resize(std::size_t(L));
  ws.up_act.resize(std::size_t(L));

  const nn::Matrix* prev = &ws.input;
  int len = Tp;
  for (int l = 1; l <= L; ++l) {
    const ConvLayer& d = down_[std::size_t(l - 1)];
    nn::conv1d_forward(d.conv, weight_map(d.w, F, d.conv.in_ch * 3), params_.data() + d.b, *prev, batch, len,
                       ws.down_cols[std::size_t(l - 1)], ws.down_pre[std::size_t(l - 1)]);
    nn::activate(nn::Activation::Gelu, ws.down_pre[std::size_t(l - 1)], ws.down_act[std::size_t(l - 1)]);
    prev = &ws.down_act[std::size_t(l - 1)];
    len /= 2;
  }

  nn::Matrix h = ws.down_act[std::size_t(L - 1)];
  for (int l = L; l >= 1; --l) {
    const std::size_t i = std::size_t(l - 1);
    const ConvLayer& u = up_[i];
    nn::upsample2(h, batch, len, ws.up_in[i]);
    len *= 2;
    nn::conv1d_forward(u.conv, weight_map(u.w, F, u.conv.in_ch * 3), params_.data() + u.b, ws.up_in[i], batch, len,
                       ws.up_cols[i], ws.up_pre[i]);
    nn::activate(nn::Activation::Gelu, ws.up_pre[i], ws.up_act[i]);
    const nn::Matrix& skip = l >= 2 ? ws.down_act[std::size_t(l - 2)] : ws.input;
    h.resize(ws.up_act[i].rows() + skip.rows(), ws.up_act[i].cols());
    h.topRows(ws.up_act[i].rows()) = ws.up_act[i];
    h.bottomRows(skip.rows()) = skip;
  }
  ws.final_in = std::move(h);
  nn::conv1d_forward(final_.conv, weight_map(final_.w, 1, final_.conv.in_ch * 3), params_.data() + final_.b,
                     ws.final_in, batch, Tp, ws.final_cols, ws.final_out);
  ws.pred.resize(batch, T);
  for (int b = 0; b < batch; ++b) ws.pred.row(b) = ws.final_out.block(0, Eigen::Index(b) * Tp, 1, T);
  return ws.pred;
}

void InrModel::fuse_backward(FusionWorkspace& ws, const Eigen::MatrixXd& grad_pred, Eigen::VectorXd& grad,
                             Eigen::MatrixXd* grad_modulated) const {
  const int Tp = cfg_.padded_T(), T = cfg_.T, F = cfg_.fusion_width, L = cfg_.fusion_levels;
  const int batch = ws.batch;
  nn::Matrix g_out = nn::Matrix::Zero(1, Eigen::Index(batch) * Tp);
  for (int b = 0; b < batch; ++b) g_out.block(0, Eigen::Index(b) * Tp, 1, T) = grad_pred.row(b);

  nn::Matrix g_h;
  nn::conv1d_backward(final_.conv, weight_map(final_.w, 1, final_.conv.in_ch * 3), ws.final_cols, g_out, batch, Tp,
                      nn::MatMap(grad.data() + final_.w, 1, final_.conv.in_ch * 3), grad.data() + final_.b, &g_h);

  // g_down[l] is the gradient w.r.t. d_l; d_0 is the fusion input.
  std::vector<nn::Matrix> g_down(std::size_t(L + 1));
  g_down[0] = nn::Matrix::Zero(ws.input.rows(), ws.input.cols());
  for (int l = 1; l <= L; ++l) g_down[std::size_t(l)] = nn::Matrix::Zero(F, ws.down_act[std::size_t(l - 1)].cols());

  int len = Tp;
  for (int l = 1; l <= L; ++l) {
    const std::size_t i = std::size_t(l - 1);
    const ConvLayer& u = up_[i];
    g_down[std::size_t(l - 1)] += g_h.bottomRows(g_h.rows() - F);
    nn::Matrix g_act = g_h.topRows(F);
    nn::activate_backward(nn::Activation::Gelu, ws.up_pre[i], g_act);
    nn::Matrix g_in;
    nn::conv1d_backward(u.conv, weight_map(u.w, F, u.conv.in_ch * 3), ws.up_cols[i], g_act, batch, len,
                        nn::MatMap(grad.data() + u.w, F, u.conv.in_ch * 3), grad.data() + u.b, &g_in);
    len /= 2;
    nn::upsample2_backward(g_in, batch, len, g_h);
    if (l == L) g_down[std::size_t(L)] += g_h;
  }

  for (int l = L; l >= 1; --l) {
    const std::size_t i = std::size_t(l - 1);
    const ConvLayer& d = down_[i];
    nn::Matrix g = g_down[std::size_t(l)];
    nn::activate_backward(nn::Activation::Gelu, ws.down_pre[i], g);
    const int in_len = Tp >> (l - 1);
    nn::Matrix g_in;
    nn::conv1d_backward(d.conv, weight_map(d.w, F, d.conv.in_ch * 3), ws.down_cols[i], g, batch, in_len,
                        nn::MatMap(grad.data() + d.w, F, d.conv.in_ch * 3), grad.data() + d.b, &g_in);
    g_down[std::size_t(l - 1)] += g_in;
  }
  if (grad_modulated) *grad_modulated = std::move(g_down[0]);
}

Eigen::MatrixXd InrModel::fuse(const Eigen::MatrixXd& modulated, int batch) const {
  FusionWorkspace ws;
  return fuse(modulated, batch, ws);
}

// --- full model -------------------------------------------------------------

const Eigen::MatrixXd& InrModel::forward(const Eigen::MatrixXd& embedded, Workspace& ws) const {
  const Eigen::MatrixXd& w = forward_weights(embedded, ws.weights);
  const int batch = int(embedded.cols());
  if (!cfg_.fusion) {
    ws.fusion.batch = batch;
    ws.fusion.pred.noalias() = w.transpose() * bank();
    return ws.fusion.pred;
  }
  encoder_forward(ws.encoders);
  fuse(modulate(w, ws.encoders.features), batch, ws.fusion);
  ws.fusion.pred.noalias() += w.transpose() * bank();
  return ws.fusion.pred;
}

void InrModel::backward(Workspace& ws, const Eigen::MatrixXd& grad_pred, Eigen::VectorXd& grad) const {
  if (grad.size() != params_.size()) grad = Eigen::VectorXd::Zero(params_.size());
  const Eigen::MatrixXd& w = ws.weights.out;
  const int K = cfg_.K, C = cfg_.feat_channels, T = cfg_.T, Tp = cfg_.padded_T();
  Eigen::MatrixXd grad_w = bank() * grad_pred.transpose();
  nn::MatMap(grad.data() + bank_offset_, K, T).noalias() += w * grad_pred;
  if (cfg_.fusion) {
    Eigen::MatrixXd g_x0;
    fuse_backward(ws.fusion, grad_pred, grad, &g_x0);
    const Eigen::MatrixXd& features = ws.encoders.features;
    const Eigen::Index B = w.cols();
    Eigen::MatrixXd g_feat = Eigen::MatrixXd::Zero(features.rows(), T);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (int k = 0; k < K; ++k) {
        const auto block = g_x0.block(Eigen::Index(k) * C, b * Tp, C, T);
        grad_w(k, b) += (block.array() * features.middleRows(Eigen::Index(k) * C, C).array()).sum();
        g_feat.middleRows(Eigen::Index(k) * C, C) += w(k, b) * block;
      }
    }
    encoder_backward(ws.encoders, g_feat, grad);
  }
  backward_weights(ws.weights, grad_w, grad);
}

Eigen::MatrixXd InrModel::forward(const Eigen::MatrixXd& embedded) const {
  Workspace ws;
  return forward(embedded, ws);
}

}  // namespace icnr
