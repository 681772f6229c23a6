#include "emaattn/model.hpp"

#include "emaattn/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace emaattn {

// Implemented in recurrent.cpp.
LossAndGrads recurrent_loss_and_grads(const ModelParams& params, const Matrix& x, const Mask& mask, int y,
                                      double weight);

const char* to_string(Variant v) {
  switch (v) {
    case Variant::dual: return "dual";
    case Variant::temporal_only: return "temporal_only";
    case Variant::recurrent_baseline: return "recurrent_baseline";
  }
  return "dual";
}

Variant parse_variant(const std::string& name) {
  if (name == "dual") return Variant::dual;
  if (name == "temporal_only") return Variant::temporal_only;
  if (name == "recurrent_baseline") return Variant::recurrent_baseline;
  throw Error(Errc::config_error, "unknown model variant '" + name + "'");
}

const char* to_string(ClassWeighting w) { return w == ClassWeighting::balanced ? "balanced" : "none"; }

ClassWeighting parse_class_weighting(const std::string& name) {
  if (name == "none") return ClassWeighting::none;
  if (name == "balanced") return ClassWeighting::balanced;
  throw Error(Errc::config_error, "unknown class weighting '" + name + "'");
}

const char* block_name(Block b) {
  static constexpr const char* names[kBlockCount] = {
      "temporal_query", "temporal_key", "temporal_value", "feature_query", "feature_key", "feature_value",
      "gru_wz",         "gru_uz",       "gru_bz",         "gru_wr",        "gru_ur",      "gru_br",
      "gru_wn",         "gru_un",       "gru_bn",         "gru_bhn",       "head_weight", "head_bias"};
  return names[static_cast<std::size_t>(b)];
}

ModelParams::ModelParams(const ModelShape& shape) : shape_(shape) {
  if (shape.v < 1 || shape.d_k < 1 || shape.d_f < 1 || shape.hidden < 1) {
    throw Error(Errc::invalid_argument, "model dimensions must be positive");
  }
  std::array<std::pair<int, int>, kBlockCount> dims{};
  auto set = [&dims](Block b, int r, int c) { dims[static_cast<std::size_t>(b)] = {r, c}; };
  const int v = shape.v;
  switch (shape.variant) {
    case Variant::dual:
      set(Block::feature_query, shape.d_f, shape.d_f);
      set(Block::feature_key, shape.d_f, shape.d_f);
      set(Block::feature_value, shape.d_f, shape.d_f);
      [[fallthrough]];
    case Variant::temporal_only:
      set(Block::temporal_query, v, shape.d_k);
      set(Block::temporal_key, v, shape.d_k);
      set(Block::temporal_value, v, shape.d_k);
      set(Block::head_weight, 1, shape.d_k + (shape.variant == Variant::dual ? shape.d_f : 0));
      break;
    case Variant::recurrent_baseline: {
      const int h = shape.hidden;
      set(Block::gru_wz, h, v);
      set(Block::gru_uz, h, h);
      set(Block::gru_bz, h, 1);
      set(Block::gru_wr, h, v);
      set(Block::gru_ur, h, h);
      set(Block::gru_br, h, 1);
      set(Block::gru_wn, h, v);
      set(Block::gru_un, h, h);
      set(Block::gru_bn, h, 1);
      set(Block::gru_bhn, h, 1);
      set(Block::head_weight, 1, h);
      break;
    }
  }
  set(Block::head_bias, 1, 1);

  std::size_t offset = 0;
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    layout_[b] = {offset, dims[b].first, dims[b].second};
    offset += layout_[b].size();
  }
  values_.assign(offset, 0.0);
}

Eigen::Map<Matrix> ModelParams::block(Block b) {
  const auto& bi = info(b);
  return {values_.data() + bi.offset, bi.rows, bi.cols};
}

Eigen::Map<const Matrix> ModelParams::block(Block b) const {
  const auto& bi = info(b);
  return {values_.data() + bi.offset, bi.rows, bi.cols};
}

ModelParams random_params(const ModelShape& shape, std::uint64_t seed, double scale) {
  ModelParams p(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& w : p.values()) w = u(rng);
  return p;
}

std::size_t BinaryLabelVector::positives() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), 1));
}

namespace {

int count_true(const Mask& m) { return static_cast<int>(std::count(m.begin(), m.end(), true)); }

void check_input(const ModelParams& params, const Matrix& x, const Mask& mask, int min_valid) {
  if (x.rows() != params.shape().v) {
    throw Error(Errc::shape_mismatch, "input has " + std::to_string(x.rows()) + " features, model expects " +
                                          std::to_string(params.shape().v));
  }
  if (static_cast<Eigen::Index>(mask.size()) != x.cols()) {
    throw Error(Errc::shape_mismatch, "mask length differs from input length");
  }
  if (count_true(mask) < min_valid) {
    throw Error(Errc::mask_too_sparse, "need at least " + std::to_string(min_valid) + " observed time-points");
  }
}

Matrix gather_observed(const Matrix& x, const Mask& mask) {
  Matrix out(x.rows(), count_true(mask));
  Eigen::Index c = 0;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    if (mask[t]) out.col(c++) = x.col(t);
  }
  return out;
}

Matrix softmax_rows(const Matrix& s) {
  Matrix a = (s.colwise() - s.rowwise().maxCoeff()).array().exp().matrix();
  a.array().colwise() /= a.rowwise().sum().array();
  return a;
}

// Mean-pooled self-attention block over `tokens` (rows). The logits are the
// bilinear form tokens * (Wq Wk^T) * tokens^T * scale, so the T x T work is
// done against the V-wide tokens rather than the projected d_k-wide ones.
struct PooledAttention {
  Matrix a;           // row-stochastic weights
  RowVector received; // mean over query rows of a
  RowVector pooled;   // received * tokens
  RowVector context;  // pooled * Wv
};

PooledAttention pooled_attention(const Matrix& tokens, const Eigen::Map<const Matrix>& wq,
                                 const Eigen::Map<const Matrix>& wk, const Eigen::Map<const Matrix>& wv,
                                 double scale) {
  PooledAttention out;
  const Matrix bilinear = (wq * wk.transpose()) * scale;
  const Matrix left = tokens * bilinear;
  out.a = softmax_rows(left * tokens.transpose());
  out.received = out.a.colwise().sum() / static_cast<double>(tokens.rows());
  out.pooled = out.received * tokens;
  out.context = out.pooled * wv;
  return out;
}

struct BlockGrads {
  Matrix g_query;
  Matrix g_key;
  Matrix g_value;
};

// Backward of PooledAttention given g = dL/d context.
BlockGrads pooled_attention_backward(const Matrix& tokens, const Eigen::Map<const Matrix>& wq,
                                     const Eigen::Map<const Matrix>& wk, const Eigen::Map<const Matrix>& wv,
                                     double scale, const PooledAttention& fwd, const RowVector& g) {
  BlockGrads out;
  out.g_value = fwd.pooled.transpose() * g;
  // dL/dA[i,j] = u_j for every query row i
  const Vector u = (tokens * (wv * g.transpose())) / static_cast<double>(tokens.rows());
  const Vector row_dot = fwd.a * u;
  Matrix gs = (fwd.a.array().rowwise() * u.transpose().array()).matrix();
  gs -= (fwd.a.array().colwise() * row_dot.array()).matrix();
  const Matrix g_bilinear = (tokens.transpose() * (gs * tokens)) * scale;
  out.g_query = g_bilinear * wk;
  out.g_key = g_bilinear.transpose() * wq;
  return out;
}

double logit_grad(double p, int y, double weight) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;  // clamped region is flat
  return weight * (p - y);
}

}  // namespace

Matrix feature_descriptors(const Matrix& x, const Mask& mask, int d_f) {
  const Matrix obs = gather_observed(x, mask);
  const Eigen::Index n = obs.cols();
  Matrix out = Matrix::Zero(x.rows(), d_f);
  if (n == 0) return out;
  for (Eigen::Index f = 0; f < obs.rows(); ++f) {
    const RowVector y = obs.row(f);
    const double mean = y.mean();
    const RowVector centred = y.array() - mean;
    const double ss = centred.squaredNorm();
    const double sd = std::sqrt(ss / static_cast<double>(n));
    double lag1 = 0.0;
    double slope = 0.0;
    if (n >= 2 && ss > 0.0) {
      lag1 = centred.head(n - 1).dot(centred.tail(n - 1)) / ss;
    }
    if (n >= 2) {
      // time rescaled to [0, 1]
      const RowVector tau = RowVector::LinSpaced(n, 0.0, 1.0);
      const RowVector tau_c = tau.array() - tau.mean();
      slope = tau_c.dot(centred) / tau_c.squaredNorm();
    }
    const double desc[kFeatureDescriptors] = {mean, sd, lag1, slope, y.minCoeff(), y.maxCoeff()};
    for (int d = 0; d < std::min(d_f, kFeatureDescriptors); ++d) out(f, d) = desc[d];
  }
  return out;
}

ForwardResult forward(const ModelParams& params, const Matrix& x, const Mask& mask) {
  const ModelShape& shape = params.shape();
  ForwardResult out;
  out.bundle.mask = mask;
  const Eigen::Index t_len = x.cols();

  if (shape.variant == Variant::recurrent_baseline) {
    check_input(params, x, mask, 1);
    out.p = recurrent_baseline_forward(params, x, mask);
    const int n = count_true(mask);
    out.bundle.t_valid = n;
    out.bundle.a_t = Matrix::Zero(t_len, t_len);
    for (Eigen::Index i = 0; i < t_len; ++i) {
      if (!mask[i]) continue;
      for (Eigen::Index j = 0; j < t_len; ++j) out.bundle.a_t(i, j) = mask[j] ? 1.0 / n : 0.0;
    }
    out.bundle.a_f = Matrix::Constant(shape.v, shape.v, 1.0 / shape.v);
    return out;
  }

  check_input(params, x, mask, 2);
  const int n = count_true(mask);
  out.bundle.t_valid = n;

  const Matrix tokens = x.transpose();
  const Matrix q = tokens * params.block(Block::temporal_query);
  const Matrix k = tokens * params.block(Block::temporal_key);
  const Matrix u = tokens * params.block(Block::temporal_value);
  AttentionResult temporal = scaled_dot_attention(q, k, u, mask, shape.d_k);

  RowVector c_t = RowVector::Zero(shape.d_k);
  RowVector q_mean = RowVector::Zero(shape.d_k);
  RowVector k_mean = RowVector::Zero(shape.d_k);
  for (Eigen::Index i = 0; i < t_len; ++i) {
    if (mask[i]) {
      c_t += temporal.context.row(i);
      q_mean += q.row(i);
      k_mean += k.row(i);
    } else {
      temporal.weights.row(i).setZero();
    }
  }
  c_t /= n;
  out.bundle.mean_temporal_score = (q_mean / n).dot(k_mean / n) / std::sqrt(static_cast<double>(shape.d_k));
  out.bundle.a_t = std::move(temporal.weights);

  const auto head = params.block(Block::head_weight);
  double z = head.leftCols(shape.d_k).row(0).dot(c_t) + params.block(Block::head_bias)(0, 0);

  if (shape.variant == Variant::dual) {
    const Matrix desc = feature_descriptors(x, mask, shape.d_f);
    const Matrix qf = desc * params.block(Block::feature_query);
    const Matrix kf = desc * params.block(Block::feature_key);
    const Matrix uf = desc * params.block(Block::feature_value);
    AttentionResult feat = scaled_dot_attention(qf, kf, uf, Mask(static_cast<std::size_t>(shape.v), true), shape.d_f);
    const RowVector c_f = feat.context.colwise().mean();
    z += head.rightCols(shape.d_f).row(0).dot(c_f);
    out.bundle.a_f = std::move(feat.weights);
  } else {
    out.bundle.a_f = Matrix::Constant(shape.v, shape.v, 1.0 / shape.v);
  }
  out.p = sigmoid(z);
  return out;
}

LossAndGrads loss_and_grads(const ModelParams& params, const Matrix& x, const Mask& mask, int y, double weight) {
  const ModelShape& shape = params.shape();
  if (shape.variant == Variant::recurrent_baseline) return recurrent_loss_and_grads(params, x, mask, y, weight);
  check_input(params, x, mask, 2);

  // Padded keys get zero weight and padded queries are not pooled, so the
  // observed columns alone determine the loss.
  const Matrix tokens = gather_observed(x, mask).transpose();
  const double scale_t = 1.0 / std::sqrt(static_cast<double>(shape.d_k));
  const auto wq = params.block(Block::temporal_query);
  const auto wk = params.block(Block::temporal_key);
  const auto wv = params.block(Block::temporal_value);
  const PooledAttention temporal = pooled_attention(tokens, wq, wk, wv, scale_t);

  const auto head = params.block(Block::head_weight);
  double z = head.leftCols(shape.d_k).row(0).dot(temporal.context) + params.block(Block::head_bias)(0, 0);

  const bool dual = shape.variant == Variant::dual;
  const double scale_f = 1.0 / std::sqrt(static_cast<double>(shape.d_f));
  Matrix desc;
  PooledAttention feature;
  if (dual) {
    desc = feature_descriptors(tokens.transpose(), Mask(static_cast<std::size_t>(tokens.rows()), true), shape.d_f);
    feature = pooled_attention(desc, params.block(Block::feature_query), params.block(Block::feature_key),
                               params.block(Block::feature_value), scale_f);
    z += head.rightCols(shape.d_f).row(0).dot(feature.context);
  }

  const double p = sigmoid(z);
  LossAndGrads out{weight * bce_loss(p, y), ModelParams(shape)};
  if (!std::isfinite(out.loss)) throw Error(Errc::non_finite_loss, "loss is not finite");
  const double dz = logit_grad(p, y, weight);
  if (dz == 0.0) return out;

  ModelParams& g = out.grads;
  auto g_head = g.block(Block::head_weight);
  g_head.leftCols(shape.d_k).row(0) = dz * temporal.context;
  g.block(Block::head_bias)(0, 0) = dz;

  const RowVector g_ct = dz * head.leftCols(shape.d_k).row(0);
  const BlockGrads tg = pooled_attention_backward(tokens, wq, wk, wv, scale_t, temporal, g_ct);
  g.block(Block::temporal_query) = tg.g_query;
  g.block(Block::temporal_key) = tg.g_key;
  g.block(Block::temporal_value) = tg.g_value;

  if (dual) {
    g_head.rightCols(shape.d_f).row(0) = dz * feature.context;
    const RowVector g_cf = dz * head.rightCols(shape.d_f).row(0);
    const BlockGrads fg =
        pooled_attention_backward(desc, params.block(Block::feature_query), params.block(Block::feature_key),
                                  params.block(Block::feature_value), scale_f, feature, g_cf);
    g.block(Block::feature_query) = fg.g_query;
    g.block(Block::feature_key) = fg.g_key;
    g.block(Block::feature_value) = fg.g_value;
  }
  return out;
}

double check_model_gradients(const ModelParams& params, const Matrix& x, const Mask& mask, int y, double weight,
                             double eps, int n_probe, std::uint64_t seed) {
  ModelParams probe = params;
  const LossGradFn f = [&](std::span<const double> theta, std::span<double> grads) {
    std::copy(theta.begin(), theta.end(), probe.values().begin());
    const LossAndGrads lg = loss_and_grads(probe, x, mask, y, weight);
    const auto g = lg.grads.values();
    std::copy(g.begin(), g.end(), grads.begin());
    return lg.loss;
  };
  return grad_check(f, params.values(), eps, n_probe, seed);
}

double gradcheck_random_instances(Variant variant, int v, const std::vector<int>& t_lengths, int instances,
                                  double eps, std::uint64_t seed, double param_scale) {
  if (v < 1 || t_lengths.empty() || instances < 1) throw Error(Errc::invalid_argument, "empty gradient check");
  const int min_valid = variant == Variant::recurrent_baseline ? 1 : 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < instances; ++k) {
    const int t = t_lengths[static_cast<std::size_t>(k) % t_lengths.size()];
    if (t < min_valid) throw Error(Errc::invalid_argument, "series too short for a gradient check");
    const int t_valid = std::uniform_int_distribution<int>(min_valid, t)(rng);
    Matrix x = Matrix::Zero(v, t);
    Mask mask(static_cast<std::size_t>(t), false);
    for (int j = 0; j < t_valid; ++j) {
      mask[static_cast<std::size_t>(j)] = true;
      for (int f = 0; f < v; ++f) x(f, j) = unit(rng);
    }
    ModelShape shape;
    shape.variant = variant;
    shape.v = v;
    const ModelParams params = random_params(shape, rng(), param_scale);
    const int y = static_cast<int>(rng() & 1U);
    const int n_probe = static_cast<int>(params.size());
    worst = std::max(worst, check_model_gradients(params, x, mask, y, 1.0, eps, n_probe, rng()));
  }
  return worst;
}

TrainedModel train_model(const PaddedDataset& train, const BinaryLabelVector& labels, const Hyperparams& hyper) {
  if (hyper.epochs < 1) throw Error(Errc::invalid_argument, "epochs must be >= 1");
  if (!(hyper.lr > 0.0)) throw Error(Errc::invalid_argument, "learning rate must be > 0");
  if (!(hyper.weight_decay >= 0.0)) throw Error(Errc::invalid_argument, "weight decay must be >= 0");
  if (labels.values.size() != train.size()) {
    throw Error(Errc::alignment_error, "label vector length differs from dataset size");
  }
  const std::size_t n = train.size();
  const std::size_t n_pos = labels.positives();
  if (n_pos == 0 || n_pos == n) throw Error(Errc::single_class_input, "training labels contain a single class");

  TrainedModel model;
  model.hyper = hyper;
  model.positive_cluster = labels.positive_cluster;
  model.feature_names = train.feature_names;
  model.params = random_params(hyper.shape(train.v()), hyper.seed);

  std::vector<Matrix> inputs;
  std::vector<Mask> masks;
  std::vector<double> weights;
  inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    inputs.push_back(train.observed(i));
    masks.emplace_back(static_cast<std::size_t>(inputs.back().cols()), true);
    double w = 1.0;
    if (hyper.class_weighting == ClassWeighting::balanced) {
      const std::size_t cls = labels.values[i] == 1 ? n_pos : n - n_pos;
      w = static_cast<double>(n) / (2.0 * static_cast<double>(cls));
    }
    weights.push_back(w);
  }

  AdamState adam(model.params.size(), hyper.lr);
  adam.weight_decay = hyper.weight_decay;
  std::vector<double> grad(model.params.size());
  model.loss_trace.reserve(static_cast<std::size_t>(hyper.epochs));
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const LossAndGrads lg = loss_and_grads(model.params, inputs[i], masks[i], labels.values[i], weights[i]);
      total += lg.loss;
      const auto gi = lg.grads.values();
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += gi[j];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& gj : grad) gj *= inv_n;
    model.loss_trace.push_back(total * inv_n);
    adam_step(model.params.values(), grad, adam);
  }
  return model;
}

Prediction predict(const TrainedModel& model, const Matrix& x, const Mask& mask) {
  ForwardResult fr = forward(model.params, x, mask);
  return {decide(fr.p), fr.p, std::move(fr.bundle)};
}

}  // namespace emaattn
