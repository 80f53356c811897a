#pragma once

// Central-difference gradient check for MLPs, shared by the unit and
// acceptance suites.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "crutchgait/nn.hpp"

namespace crutchgait::testing {

/// Scalar loss over a network output batch plus its gradient.
struct LossFn {
  std::function<double(const Eigen::MatrixXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> grad;
};

/// Random linear projection of the outputs: L = sum(W .* Y).
inline LossFn linear_loss(const Eigen::MatrixXd& w) {
  return {[w](const Eigen::MatrixXd& y) { return (w.array() * y.array()).sum(); },
          [w](const Eigen::MatrixXd&) { return w; }};
}

/// Summed diagonal Gaussian log-probability of fixed actions, where the
/// network outputs [mean; std] per column.
inline LossFn gaussian_loss(const Eigen::MatrixXd& actions) {
  const Eigen::Index d = actions.rows();
  return {[actions, d](const Eigen::MatrixXd& y) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < y.cols(); ++k) {
              s += gaussian_log_prob(y.col(k).head(d), y.col(k).tail(d), actions.col(k));
            }
            return s;
          },
          [actions, d](const Eigen::MatrixXd& y) {
            Eigen::MatrixXd g(y.rows(), y.cols());
            for (Eigen::Index k = 0; k < y.cols(); ++k) {
              const auto lg =
                  gaussian_log_prob_grad(y.col(k).head(d), y.col(k).tail(d), actions.col(k));
              g.col(k).head(d) = lg.d_mean;
              g.col(k).tail(d) = lg.d_std;
            }
            return g;
          }};
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic and central-difference gradients of every parameter.
/// Relative error uses max(|a|, |n|, floor) as the denominator so that
/// vanishing gradients are judged on absolute error.
inline GradCheckResult grad_check(const MlpParams& p, const Eigen::MatrixXd& x,
                                  const LossFn& loss, double h = 1e-5,
                                  double floor = 1e-3) {
  MlpCache cache;
  const Eigen::MatrixXd y = mlp_forward(p, x, &cache);
  const MlpGrads g = mlp_backward(p, cache, loss.grad(y));
  GradCheckResult r;
  MlpParams q = p;
  auto probe = [&](double& slot, double analytic) {
    const double orig = slot;
    slot = orig + h;
    const double up = loss.value(mlp_forward(q, x));
    slot = orig - h;
    const double dn = loss.value(mlp_forward(q, x));
    slot = orig;
    const double numeric = (up - dn) / (2.0 * h);
    const double den = std::max({std::abs(analytic), std::abs(numeric), floor});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / den);
    ++r.checked;
  };
  for (std::size_t i = 0; i < q.layers.size(); ++i) {
    auto& l = q.layers[i];
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
      for (Eigen::Index rr = 0; rr < l.weight.rows(); ++rr)
        probe(l.weight(rr, c), g.layers[i].weight(rr, c));
    for (Eigen::Index rr = 0; rr < l.bias.size(); ++rr) probe(l.bias[rr], g.layers[i].bias[rr]);
  }
  return r;
}

/// One randomly shaped network with a matching loss. `kind` cycles through
/// critic (linear output), Gaussian policy head, and tanh/softplus outputs.
struct GradCheckCase {
  std::string label;
  MlpParams net;
  Eigen::MatrixXd input;
  LossFn loss;
};

inline GradCheckCase make_grad_check_case(int index, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> width(1, 8), depth(1, 3), batch(1, 5);
  std::normal_distribution<double> n01(0.0, 1.0);
  const int kind = index % 4;
  const int in = width(rng);
  const int act = width(rng);
  std::vector<int> widths{in};
  const int hidden = depth(rng);
  for (int h = 0; h < hidden; ++h) widths.push_back(width(rng));
  GradCheckCase c;
  Activation out = Activation::kLinear;
  switch (kind) {
    case 0:
      c.label = "critic";
      widths.push_back(1);
      break;
    case 1:
      c.label = "gaussian";
      widths.push_back(2 * act);
      out = Activation::kGaussianHead;
      break;
    case 2:
      c.label = "tanh";
      widths.push_back(act);
      out = Activation::kTanh;
      break;
    default:
      c.label = "softplus";
      widths.push_back(act);
      out = Activation::kSoftplus;
      break;
  }
  c.net = make_mlp(widths, out, rng, 1.0, 1.0);
  for (auto& l : c.net.layers)
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = 0.3 * n01(rng);
  const int b = batch(rng);
  c.input = Eigen::MatrixXd::NullaryExpr(in, b, [&] { return n01(rng); });
  if (kind == 1) {
    c.loss = gaussian_loss(Eigen::MatrixXd::NullaryExpr(act, b, [&] { return n01(rng); }));
  } else {
    const Eigen::Index rows = c.net.layers.back().out();
    c.loss = linear_loss(Eigen::MatrixXd::NullaryExpr(rows, b, [&] { return n01(rng); }));
  }
  return c;
}

}  // namespace crutchgait::testing
