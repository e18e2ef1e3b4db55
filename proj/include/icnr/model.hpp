#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icnr/nn.hpp"
#include "icnr/rng.hpp"
#include "icnr/volume.hpp"

namespace icnr {

struct ModelConfig {
  int K = 4;                  // pattern count
  int T = 64;                 // series length
  int embed_freqs = 10;       // frequency bands L of the coordinate embedding
  int mlp_layers = 5;         // linear layers per weight-field MLP
  int mlp_width = 64;
  int feat_channels = 8;      // encoder channels per pattern
  int fusion_levels = 2;
  int fusion_width = 32;
  bool fusion = true;         // false: plain weighted superposition of the bank rows
  bool zero_init_output = true;  // fusion output conv starts at zero, so forward starts at the superposition
  nn::Activation encoder_activation = nn::Activation::Gelu;

  void validate() const;
  int embed_dim() const { return 6 * embed_freqs; }
  int padded_T() const;
  int feature_channels() const { return K * feat_channels; }
};

/// Closed-form parameter count of a model built from `cfg`:
///   bank      K*T
///   mlps      K * sum_l (in_l*out_l + out_l), in_0 = 6L, hidden = width, last out = 1
///   encoders  K * (3C + C) + K * (3C^2 + C)
///   down      (3*KC*F + F) + (levels-1) * (3F^2 + F)
///   up        (3F^2 + F) + (levels-1) * (6F^2 + F)
///   final     3*(F + KC) + 1
/// where C = feat_channels, F = fusion_width; encoder/down/up/final vanish when fusion is off.
std::size_t parameter_count(const ModelConfig& cfg);

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

// NeRF-style encoding, per axis (sin 2^0 pi p, cos 2^0 pi p, ..., sin 2^{L-1} pi p, cos 2^{L-1} pi p).
Eigen::VectorXd embed_coords(const Eigen::Vector3d& v, int L);
// coords: B x 3 normalized -> 6L x B
Eigen::MatrixXd embed_batch(const Eigen::MatrixXd& coords, int L);
// Voxel centre to (-1, 1) per axis: (2i + 1) / n - 1; singleton axes map to 0.
Eigen::Vector3d normalize_coord(const Coord& c, const Dims3& dims);
Eigen::MatrixXd normalized_coords(const std::vector<Coord>& coords, const Dims3& dims);

// Block i (channels i*C .. i*C+C-1) of `features` scaled by w(i).
Eigen::MatrixXd channel_attention(const Eigen::VectorXd& w, const Eigen::MatrixXd& features, int channels_per_pattern);

class InrModel {
 public:
  struct WeightWorkspace {
    const Eigen::MatrixXd* input = nullptr;
    std::vector<std::vector<nn::Matrix>> pre, act;  // [k][layer]
    nn::Matrix out;                                  // K x B
  };
  struct EncoderWorkspace {
    std::vector<nn::Matrix> cols1, pre1, act1, cols2;
    nn::Matrix features;  // KC x T
  };
  struct FusionWorkspace {
    int batch = 0;
    nn::Matrix input;                                       // KC x B*Tp
    std::vector<nn::Matrix> down_cols, down_pre, down_act;  // index l-1
    std::vector<nn::Matrix> up_in, up_cols, up_pre, up_act; // index l-1
    nn::Matrix final_in, final_cols, final_out;
    nn::Matrix pred;  // B x T
  };
  struct Workspace {
    WeightWorkspace weights;
    EncoderWorkspace encoders;
    FusionWorkspace fusion;
  };

  explicit InrModel(const ModelConfig& cfg, std::uint64_t seed = 0);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& tensor(const std::string& name) const;
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  std::size_t parameter_count() const { return std::size_t(params_.size()); }

  Eigen::Map<Eigen::MatrixXd> bank();
  Eigen::Map<const Eigen::MatrixXd> bank() const;
  void set_bank(const Eigen::MatrixXd& patterns);

  // Index range [begin, end) of the weight-field MLP parameters in the flat vector.
  std::pair<Eigen::Index, Eigen::Index> weight_field_range() const;
  std::pair<Eigen::Index, Eigen::Index> fusion_range() const;

  // embedded: 6L x B
  Eigen::MatrixXd predict_weights(const Eigen::MatrixXd& embedded) const;  // K x B
  Eigen::MatrixXd pattern_features() const;                                 // KC x T
  // Superposition w^T C_train plus, with fusion on, the fused correction.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& embedded) const;          // B x T
  // modulated: KC x B*Tp (right zero padding already applied)
  Eigen::MatrixXd fuse(const Eigen::MatrixXd& modulated, int batch) const;  // B x T

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& embedded, Workspace& ws) const;
  void backward(Workspace& ws, const Eigen::MatrixXd& grad_pred, Eigen::VectorXd& grad) const;

  const Eigen::MatrixXd& forward_weights(const Eigen::MatrixXd& embedded, WeightWorkspace& ws) const;
  void backward_weights(const WeightWorkspace& ws, const Eigen::MatrixXd& grad_w, Eigen::VectorXd& grad) const;

  const Eigen::MatrixXd& fuse(const Eigen::MatrixXd& modulated, int batch, FusionWorkspace& ws) const;
  void fuse_backward(FusionWorkspace& ws, const Eigen::MatrixXd& grad_pred, Eigen::VectorXd& grad,
                     Eigen::MatrixXd* grad_modulated) const;

  // Channel attention applied to a batch: KC x B*Tp.
  Eigen::MatrixXd modulate(const Eigen::MatrixXd& w, const Eigen::MatrixXd& features) const;

 private:
  struct Layer {
    Eigen::Index w = 0, b = 0;  // offsets of weight and bias tensors
    int in = 0, out = 0;
  };
  struct ConvLayer {
    Eigen::Index w = 0, b = 0;
    nn::Conv1d conv;
  };

  Eigen::Index add_tensor(const std::string& name, std::vector<int> shape);
  void init_uniform(Eigen::Index offset, Eigen::Index size, double bound, Rng& rng);

  nn::ConstMatMap weight_map(Eigen::Index offset, int rows, int cols) const {
    return nn::ConstMatMap(params_.data() + offset, rows, cols);
  }
  void encoder_forward(EncoderWorkspace& ws) const;
  void encoder_backward(EncoderWorkspace& ws, const Eigen::MatrixXd& grad_features, Eigen::VectorXd& grad) const;

  ModelConfig cfg_;
  std::vector<TensorInfo> tensors_;
  Eigen::VectorXd params_;
  Eigen::Index bank_offset_ = 0;
  std::vector<Layer> mlp_;             // stacked over K: tensor k-block offset = k*out*in
  ConvLayer enc1_, enc2_;              // stacked over K
  std::vector<ConvLayer> down_, up_;   // index l-1
  ConvLayer final_;
  Eigen::Index fusion_begin_ = 0;
};

}  // namespace icnr
