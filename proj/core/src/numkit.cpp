#include "emaattn/numkit.hpp"

#include "emaattn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace emaattn {

Matrix masked_softmax_rows(const Matrix& logits, const Mask& key_mask) {
  const Eigen::Index cols = logits.cols();
  if (static_cast<Eigen::Index>(key_mask.size()) != cols) {
    throw Error(Errc::shape_mismatch, "mask length " + std::to_string(key_mask.size()) +
                                          " != logit columns " + std::to_string(cols));
  }
  if (std::none_of(key_mask.begin(), key_mask.end(), [](bool b) { return b; })) {
    throw Error(Errc::all_masked_row, "every key is masked");
  }

  Matrix out(logits.rows(), cols);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double row_max = kMaskedLogit;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double s = key_mask[j] ? logits(i, j) : logits(i, j) + kMaskedLogit;
      out(i, j) = s;
      row_max = std::max(row_max, s);
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double e = std::exp(out(i, j) - row_max);
      out(i, j) = e;
      total += e;
    }
    out.row(i) /= total;
  }
  return out;
}

AttentionResult scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                     const Mask& key_mask, int d_k) {
  if (q.cols() != d_k || k.cols() != d_k || v.rows() != k.rows() || d_k <= 0) {
    throw Error(Errc::shape_mismatch, "scaled_dot_attention: Q/K width must equal d_k and V rows must equal K rows");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
  Matrix scores = (q * k.transpose()) * scale;
  AttentionResult out;
  out.weights = masked_softmax_rows(scores, key_mask);
  out.context = out.weights * v;
  return out;
}

double bce_loss(double p, int y) {
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return y == 1 ? -std::log(pc) : -std::log1p(-pc);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw Error(Errc::length_mismatch, "adam_step: params, grads and moment buffers differ in length");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= state.lr * (m_hat / (std::sqrt(v_hat) + state.eps) + state.weight_decay * params[i]);
  }
}

double grad_check(const LossGradFn& f, std::span<const double> params, double eps, int n_probe,
                  std::uint64_t seed) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw Error(Errc::invalid_argument, "grad_check: eps must lie in [1e-7, 1e-3]");
  }
  const std::size_t n = params.size();
  if (n == 0 || n_probe <= 0) return 0.0;

  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> analytic(n, 0.0);
  std::vector<double> scratch(n, 0.0);
  const double base = f(theta, analytic);
  if (!std::isfinite(base)) throw Error(Errc::non_finite_loss, "grad_check: loss is not finite");

  // Distinct coordinates when there are enough of them.
  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  std::vector<std::size_t> probes;
  for (int p = 0; p < n_probe; ++p) probes.push_back(coords[static_cast<std::size_t>(p) % n]);

  double worst = 0.0;
  for (std::size_t c : probes) {
    const double saved = theta[c];
    theta[c] = saved + eps;
    const double plus = f(theta, scratch);
    theta[c] = saved - eps;
    const double minus = f(theta, scratch);
    theta[c] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw Error(Errc::non_finite_loss, "grad_check: perturbed loss is not finite");
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    const double err =
        std::abs(analytic[c] - numeric) / std::max(1e-8, std::abs(analytic[c]) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace emaattn
