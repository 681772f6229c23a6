#pragma once

// Binary cluster-membership classifiers: the dual (temporal + feature)
// self-attention model, its temporal-only ablation and a GRU baseline.

#include "emaattn/dataset.hpp"
#include "emaattn/numkit.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace emaattn {

enum class Variant { dual, temporal_only, recurrent_baseline };

const char* to_string(Variant v);
Variant parse_variant(const std::string& name);

enum class ClassWeighting { none, balanced };

const char* to_string(ClassWeighting w);
ClassWeighting parse_class_weighting(const std::string& name);

struct ModelShape {
  Variant variant = Variant::dual;
  int v = 0;        // input features
  int d_k = 16;     // temporal projection width
  int d_f = 8;      // feature-token width (descriptor count and projection width)
  int hidden = 16;  // GRU state width

  bool operator==(const ModelShape&) const = default;
};

// Named parameter blocks. Blocks absent from a variant have zero size.
enum class Block {
  temporal_query,  // V x d_k
  temporal_key,    // V x d_k
  temporal_value,  // V x d_k
  feature_query,   // d_f x d_f
  feature_key,     // d_f x d_f
  feature_value,   // d_f x d_f
  gru_wz, gru_uz, gru_bz,
  gru_wr, gru_ur, gru_br,
  gru_wn, gru_un, gru_bn, gru_bhn,
  head_weight,     // 1 x (d_k [+ d_f]) or 1 x hidden
  head_bias,       // 1 x 1
};
inline constexpr std::size_t kBlockCount = static_cast<std::size_t>(Block::head_bias) + 1;

const char* block_name(Block b);

struct BlockInfo {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Flat parameter vector with a fixed block layout. The same type carries
// gradients.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelShape& shape);  // zero-initialised

  const ModelShape& shape() const { return shape_; }
  Variant variant() const { return shape_.variant; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  const BlockInfo& info(Block b) const { return layout_[static_cast<std::size_t>(b)]; }
  Eigen::Map<Matrix> block(Block b);
  Eigen::Map<const Matrix> block(Block b) const;

 private:
  ModelShape shape_;
  std::array<BlockInfo, kBlockCount> layout_{};
  std::vector<double> values_;
};

// Uniform(-scale, scale) initialisation from a seeded stream.
ModelParams random_params(const ModelShape& shape, std::uint64_t seed, double scale = 0.05);

// Per-individual attention weights.
struct AttentionBundle {
  Matrix a_t;  // T x T; rows of observed queries are stochastic over observed keys, other rows are 0
  Matrix a_f;  // V x V, row-stochastic
  Mask mask;   // observed time-points of the input
  int t_valid = 0;
  // Mean scaled dot-product score over observed query/key pairs (before softmax).
  double mean_temporal_score = 0.0;
};

struct ForwardResult {
  double p = 0.5;
  AttentionBundle bundle;
};

// Number of fixed descriptors per feature token: mean, sd, lag-1
// autocorrelation, linear-trend slope, min, max.
inline constexpr int kFeatureDescriptors = 6;

// V x d_f descriptor matrix over the observed columns of x. Slots beyond the six
// descriptors are zero; d_f < 6 truncates.
Matrix feature_descriptors(const Matrix& x, const Mask& mask, int d_f);

// Full masked forward pass. For the GRU baseline the bundle holds uniform
// placeholders. Throws Errc::shape_mismatch / Errc::mask_too_sparse.
ForwardResult forward(const ModelParams& params, const Matrix& x, const Mask& mask);

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

// weight * bce(p, y) and its exact gradient with respect to every parameter.
LossAndGrads loss_and_grads(const ModelParams& params, const Matrix& x, const Mask& mask, int y, double weight);

// Central-difference check of loss_and_grads at `params` (see grad_check).
double check_model_gradients(const ModelParams& params, const Matrix& x, const Mask& mask, int y, double weight,
                             double eps, int n_probe, std::uint64_t seed);

// Step that balances truncation against roundoff for each variant's random
// gradient-check instances.
inline double default_gradcheck_eps(Variant v) { return v == Variant::recurrent_baseline ? 1e-4 : 1e-3; }

// Worst check_model_gradients error over `instances` random problems: inputs
// uniform on [0, 1] with a random observed prefix of each length in
// t_lengths (cycled), parameters uniform(-param_scale, param_scale), every
// coordinate probed.
double gradcheck_random_instances(Variant variant, int v, const std::vector<int>& t_lengths, int instances,
                                  double eps, std::uint64_t seed, double param_scale = 0.5);

// GRU baseline: final observed hidden state -> linear -> sigmoid.
double recurrent_baseline_forward(const ModelParams& params, const Matrix& x, const Mask& mask);

struct Hyperparams {
  int d_k = 16;
  int d_f = 8;
  int hidden = 16;
  double lr = 0.01;
  double weight_decay = 1.0;  // decoupled, see AdamState
  int epochs = 300;
  std::uint64_t seed = 0;
  Variant variant = Variant::dual;
  ClassWeighting class_weighting = ClassWeighting::none;

  ModelShape shape(int v) const { return {variant, v, d_k, d_f, hidden}; }
};

struct BinaryLabelVector {
  std::vector<int> values;
  int positive_cluster = 0;

  std::size_t positives() const;
};

struct TrainedModel {
  ModelParams params;
  std::vector<double> loss_trace;  // mean weighted loss per epoch
  Hyperparams hyper;
  int positive_cluster = 0;
  std::vector<std::string> feature_names;
};

// Full-batch Adam. Throws Errc::single_class_input, Errc::invalid_argument
// (epochs < 1, lr <= 0) and Errc::alignment_error.
TrainedModel train_model(const PaddedDataset& train, const BinaryLabelVector& labels, const Hyperparams& hyper);

struct Prediction {
  int label = 0;  // 1 iff p >= 0.5
  double p = 0.5;
  AttentionBundle bundle;
};

inline int decide(double p) { return p >= 0.5 ? 1 : 0; }

Prediction predict(const TrainedModel& model, const Matrix& x, const Mask& mask);

}  // namespace emaattn
