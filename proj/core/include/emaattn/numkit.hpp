#pragma once

// Dense numeric kernel shared by the attention models: masked softmax,
// scaled dot-product attention, binary cross-entropy, Adam and a
// central-difference gradient checker.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace emaattn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// true = position observed / may be attended to.
using Mask = std::vector<bool>;

// Logit added to masked-out entries before normalization. exp() of it
// underflows to exactly 0.0.
inline constexpr double kMaskedLogit = -1e30;

// Row-wise softmax where columns with key_mask[j] == false receive exactly 0.
// Throws Errc::shape_mismatch on a length mismatch and Errc::all_masked_row if
// no column is allowed.
Matrix masked_softmax_rows(const Matrix& logits, const Mask& key_mask);

struct AttentionResult {
  Matrix context;  // A * V, rows = queries
  Matrix weights;  // A, row-stochastic over unmasked keys
};

// A = masked_softmax_rows(Q K^T / sqrt(d_k), key_mask), context = A V.
AttentionResult scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                     const Mask& key_mask, int d_k);

inline constexpr double kProbClamp = 1e-7;

// -(y ln p + (1-y) ln(1-p)) with p clamped to [1e-7, 1-1e-7].
double bce_loss(double p, int y);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled (AdamW-style) shrinkage applied as params *= 1 - lr * weight_decay.
  double weight_decay = 0.0;

  AdamState() = default;
  explicit AdamState(std::size_t n, double learning_rate = 1e-2)
      : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

// Bias-corrected Adam update in place. Throws Errc::length_mismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// Evaluates the loss at `params` and writes d loss / d params into `grads`.
using LossGradFn = std::function<double(std::span<const double> params, std::span<double> grads)>;

// Central-difference check on n_probe random coordinates. Returns the max over
// probes of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// eps must lie in [1e-7, 1e-3]; throws Errc::non_finite_loss on NaN/inf.
double grad_check(const LossGradFn& f, std::span<const double> params, double eps, int n_probe,
                  std::uint64_t seed);

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace emaattn
