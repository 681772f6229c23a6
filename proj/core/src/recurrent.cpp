// Single-layer GRU baseline with a hand-written backward pass through time.

#include "emaattn/error.hpp"
#include "emaattn/model.hpp"

#include <algorithm>
#include <cmath>

namespace emaattn {

LossAndGrads recurrent_loss_and_grads(const ModelParams& params, const Matrix& x, const Mask& mask, int y,
                                      double weight);

namespace {

// Per-step intermediates, one column per observed time-point.
struct GruTrace {
  Eigen::MatrixXd x;       // V x n
  Eigen::MatrixXd h_prev;  // H x n
  Eigen::MatrixXd z;
  Eigen::MatrixXd r;
  Eigen::MatrixXd n;
  Eigen::MatrixXd hn;      // U_n h_prev + b_hn
};

Vector logistic(const Vector& a) {
  return a.unaryExpr([](double v) { return sigmoid(v); });
}

void check(const ModelParams& params, const Matrix& x, const Mask& mask) {
  if (params.variant() != Variant::recurrent_baseline) {
    throw Error(Errc::invalid_argument, "recurrent baseline called with attention parameters");
  }
  if (x.rows() != params.shape().v || static_cast<Eigen::Index>(mask.size()) != x.cols()) {
    throw Error(Errc::shape_mismatch, "recurrent baseline input shape mismatch");
  }
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw Error(Errc::mask_too_sparse, "recurrent baseline needs at least one observed time-point");
  }
}

// Runs the GRU over observed columns and returns the final state.
Vector run(const ModelParams& params, const Matrix& x, const Mask& mask, GruTrace& tr) {
  const int h = params.shape().hidden;
  const auto wz = params.block(Block::gru_wz);
  const auto uz = params.block(Block::gru_uz);
  const auto wr = params.block(Block::gru_wr);
  const auto ur = params.block(Block::gru_ur);
  const auto wn = params.block(Block::gru_wn);
  const auto un = params.block(Block::gru_un);
  const auto bhn = params.block(Block::gru_bhn);

  const auto n_obs = static_cast<Eigen::Index>(std::count(mask.begin(), mask.end(), true));
  tr.x.resize(x.rows(), n_obs);
  for (Eigen::Index t = 0, c = 0; t < x.cols(); ++t) {
    if (mask[t]) tr.x.col(c++) = x.col(t);
  }
  // Input contributions for every step at once.
  const Eigen::MatrixXd in_z = (wz * tr.x).colwise() + params.block(Block::gru_bz).col(0);
  const Eigen::MatrixXd in_r = (wr * tr.x).colwise() + params.block(Block::gru_br).col(0);
  const Eigen::MatrixXd in_n = (wn * tr.x).colwise() + params.block(Block::gru_bn).col(0);
  tr.h_prev.resize(h, n_obs);
  tr.z.resize(h, n_obs);
  tr.r.resize(h, n_obs);
  tr.n.resize(h, n_obs);
  tr.hn.resize(h, n_obs);

  Vector state = Vector::Zero(h);
  for (Eigen::Index c = 0; c < n_obs; ++c) {
    tr.h_prev.col(c) = state;
    tr.z.col(c) = logistic(in_z.col(c) + uz * state);
    tr.r.col(c) = logistic(in_r.col(c) + ur * state);
    tr.hn.col(c) = un * state + bhn.col(0);
    tr.n.col(c) = (in_n.col(c) + tr.r.col(c).cwiseProduct(tr.hn.col(c))).array().tanh().matrix();
    state = tr.n.col(c) + tr.z.col(c).cwiseProduct(state - tr.n.col(c));
  }
  return state;
}

}  // namespace

double recurrent_baseline_forward(const ModelParams& params, const Matrix& x, const Mask& mask) {
  check(params, x, mask);
  GruTrace tr;
  const Vector h = run(params, x, mask, tr);
  const double z = params.block(Block::head_weight).row(0).dot(h.transpose()) + params.block(Block::head_bias)(0, 0);
  return sigmoid(z);
}

LossAndGrads recurrent_loss_and_grads(const ModelParams& params, const Matrix& x, const Mask& mask, int y,
                                      double weight) {
  check(params, x, mask);
  GruTrace tr;
  const Vector h_last = run(params, x, mask, tr);
  const auto head = params.block(Block::head_weight);
  const double z = head.row(0).dot(h_last.transpose()) + params.block(Block::head_bias)(0, 0);
  const double p = sigmoid(z);

  LossAndGrads out{weight * bce_loss(p, y), ModelParams(params.shape())};
  if (!std::isfinite(out.loss)) throw Error(Errc::non_finite_loss, "loss is not finite");
  if (p < kProbClamp || p > 1.0 - kProbClamp) return out;
  const double dz = weight * (p - y);

  ModelParams& g = out.grads;
  g.block(Block::head_weight).row(0) = dz * h_last.transpose();
  g.block(Block::head_bias)(0, 0) = dz;

  const auto uz = params.block(Block::gru_uz);
  const auto ur = params.block(Block::gru_ur);
  const auto un = params.block(Block::gru_un);
  // Per-step pre-activation gradients, accumulated into the weights with
  // one product each after the sweep.
  const Eigen::Index n_obs = tr.x.cols();
  const int h = params.shape().hidden;
  Eigen::MatrixXd g_az(h, n_obs), g_ar(h, n_obs), g_an(h, n_obs), g_hn(h, n_obs);
  Vector g_h = dz * head.row(0).transpose();
  for (Eigen::Index c = n_obs - 1; c >= 0; --c) {
    const auto z = tr.z.col(c).array();
    const auto r = tr.r.col(c).array();
    const auto n = tr.n.col(c).array();
    const Eigen::ArrayXd g_n = g_h.array() * (1.0 - z);
    const Eigen::ArrayXd g_z = g_h.array() * (tr.h_prev.col(c).array() - n);
    g_an.col(c) = (g_n * (1.0 - n.square())).matrix();
    g_hn.col(c) = (g_an.col(c).array() * r).matrix();
    g_az.col(c) = (g_z * z * (1.0 - z)).matrix();
    g_ar.col(c) = (g_an.col(c).array() * tr.hn.col(c).array() * r * (1.0 - r)).matrix();
    g_h = (g_h.array() * z).matrix() + uz.transpose() * g_az.col(c) + ur.transpose() * g_ar.col(c) +
          un.transpose() * g_hn.col(c);
  }
  g.block(Block::gru_wz) = g_az * tr.x.transpose();
  g.block(Block::gru_uz) = g_az * tr.h_prev.transpose();
  g.block(Block::gru_bz).col(0) = g_az.rowwise().sum();
  g.block(Block::gru_wr) = g_ar * tr.x.transpose();
  g.block(Block::gru_ur) = g_ar * tr.h_prev.transpose();
  g.block(Block::gru_br).col(0) = g_ar.rowwise().sum();
  g.block(Block::gru_wn) = g_an * tr.x.transpose();
  g.block(Block::gru_bn).col(0) = g_an.rowwise().sum();
  g.block(Block::gru_un) = g_hn * tr.h_prev.transpose();
  g.block(Block::gru_bhn).col(0) = g_hn.rowwise().sum();
  return out;
}

}  // namespace emaattn
