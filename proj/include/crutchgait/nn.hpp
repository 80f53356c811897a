#pragma once

// Fully connected networks with explicit forward/backward passes, the
// diagonal Gaussian policy helpers and an Adam optimizer.
//
// Batches are column-major: one sample per column.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crutchgait/csv.hpp"

namespace crutchgait {

enum class Activation {
  kLinear,
  kTanh,
  kSoftplus,
  kGaussianHead,  // first half linear (mean), second half softplus (std)
};

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kSoftplus: return "softplus";
    case Activation::kGaussianHead: return "gaussian_head";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "tanh") return Activation::kTanh;
  if (s == "softplus") return Activation::kSoftplus;
  if (s == "gaussian_head") return Activation::kGaussianHead;
  throw DataError("unknown activation '" + s + "'");
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double softplus_inverse(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::kLinear;

  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
  bool operator==(const DenseLayer& o) const {
    return activation == o.activation && weight.rows() == o.weight.rows() &&
           weight.cols() == o.weight.cols() && weight == o.weight &&
           bias == o.bias;
  }
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.bias.size() != l.weight.rows()) {
        throw std::invalid_argument("bias size does not match layer width");
      }
      if (i > 0 && l.in() != layers[i - 1].out()) {
        throw std::invalid_argument("layer widths are inconsistent");
      }
      if (l.activation == Activation::kGaussianHead && l.out() % 2 != 0) {
        throw std::invalid_argument("gaussian head needs an even width");
      }
    }
  }

  bool operator==(const MlpParams&) const = default;
};

/// Gradient storage has the same shape as the parameters.
using MlpGrads = MlpParams;

inline MlpGrads zeros_like(const MlpParams& p) {
  MlpGrads g = p;
  for (auto& l : g.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return g;
}

struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input of each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  Eigen::MatrixXd output;
};

namespace detail {

inline void apply_activation(Activation a, const Eigen::MatrixXd& z,
                             Eigen::MatrixXd& y) {
  switch (a) {
    case Activation::kLinear:
      y = z;
      return;
    case Activation::kTanh:
      y = z.array().tanh();
      return;
    case Activation::kSoftplus:
      y = z.unaryExpr([](double v) { return softplus(v); });
      return;
    case Activation::kGaussianHead: {
      const Eigen::Index h = z.rows() / 2;
      y.resize(z.rows(), z.cols());
      y.topRows(h) = z.topRows(h);
      y.bottomRows(h) = z.bottomRows(h).unaryExpr([](double v) { return softplus(v); });
      return;
    }
  }
}

/// dL/dz from dL/dy, elementwise.
inline Eigen::MatrixXd activation_backward(Activation a, const Eigen::MatrixXd& z,
                                           const Eigen::MatrixXd& y,
                                           const Eigen::MatrixXd& dy) {
  switch (a) {
    case Activation::kLinear:
      return dy;
    case Activation::kTanh:
      return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::kSoftplus:
      return (dy.array() * z.unaryExpr([](double v) { return sigmoid(v); }).array())
          .matrix();
    case Activation::kGaussianHead: {
      const Eigen::Index h = z.rows() / 2;
      Eigen::MatrixXd dz(dy.rows(), dy.cols());
      dz.topRows(h) = dy.topRows(h);
      dz.bottomRows(h) =
          (dy.bottomRows(h).array() *
           z.bottomRows(h).unaryExpr([](double v) { return sigmoid(v); }).array())
              .matrix();
      return dz;
    }
  }
  return dy;
}

}  // namespace detail

/// Forward pass over a batch `x` (input_dim x batch).
inline Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& x,
                                   MlpCache* cache = nullptr) {
  if (p.layers.empty() || x.rows() != p.input_dim()) {
    throw std::invalid_argument("network input has wrong dimension");
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd a = x;
  for (const auto& l : p.layers) {
    Eigen::MatrixXd z = l.weight * a;
    z.colwise() += l.bias;
    Eigen::MatrixXd y;
    detail::apply_activation(l.activation, z, y);
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(std::move(z));
    }
    a = std::move(y);
  }
  if (cache) cache->output = a;
  return a;
}

inline Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x) {
  return mlp_forward(p, Eigen::MatrixXd(x)).col(0);
}

/// Reverse pass. `grad_output` is dL/d(output) with the output's shape.
/// Gradients are summed over the batch.
inline MlpGrads mlp_backward(const MlpParams& p, const MlpCache& cache,
                             const Eigen::MatrixXd& grad_output) {
  if (cache.pre.size() != p.layers.size()) {
    throw std::invalid_argument("cache does not match the network");
  }
  if (grad_output.rows() != cache.output.rows() ||
      grad_output.cols() != cache.output.cols()) {
    throw std::invalid_argument("output gradient has wrong shape");
  }
  MlpGrads g = zeros_like(p);
  Eigen::MatrixXd dy = grad_output;
  for (int i = static_cast<int>(p.layers.size()) - 1; i >= 0; --i) {
    const auto& l = p.layers[i];
    const Eigen::MatrixXd& y =
        i + 1 < static_cast<int>(p.layers.size()) ? cache.inputs[i + 1] : cache.output;
    const Eigen::MatrixXd dz = detail::activation_backward(l.activation, cache.pre[i], y, dy);
    g.layers[i].weight.noalias() = dz * cache.inputs[i].transpose();
    g.layers[i].bias = dz.rowwise().sum();
    if (i > 0) dy.noalias() = l.weight.transpose() * dz;
  }
  return g;
}

/// Orthogonal matrix of shape rows x cols scaled by `gain`.
inline Eigen::MatrixXd orthogonal_init(int rows, int cols, double gain,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (int c = 0; c < small; ++c)
    for (int r = 0; r < big; ++r) a(r, c) = n01(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign fix so the distribution is uniform over orthogonal matrices.
  const Eigen::MatrixXd r = qr.matrixQR();
  for (int c = 0; c < small; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  Eigen::MatrixXd w = rows >= cols ? q : Eigen::MatrixXd(q.transpose());
  return gain * w;
}

/// Builds a network with tanh hidden layers and the given output activation.
/// Hidden layers use gain `hidden_gain`, the output layer `output_gain`.
inline MlpParams make_mlp(const std::vector<int>& widths, Activation output,
                          std::mt19937_64& rng, double hidden_gain = 1.0,
                          double output_gain = 1.0) {
  if (widths.size() < 2) throw std::invalid_argument("network needs >= 2 widths");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] < 1 || widths[i + 1] < 1) {
      throw std::invalid_argument("layer widths must be >= 1");
    }
    const bool last = i + 2 == widths.size();
    DenseLayer l;
    l.weight = orthogonal_init(widths[i + 1], widths[i],
                               last ? output_gain : hidden_gain, rng);
    l.bias = Eigen::VectorXd::Zero(widths[i + 1]);
    l.activation = last ? output : Activation::kTanh;
    p.layers.push_back(std::move(l));
  }
  p.validate();
  return p;
}

// ---- diagonal Gaussian -------------------------------------------------

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

inline double gaussian_log_prob(const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& std,
                                const Eigen::VectorXd& action) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) / std[i];
    lp += -std::log(std[i]) - kHalfLog2Pi - 0.5 * z * z;
  }
  return lp;
}

/// Gradients of gaussian_log_prob with respect to the mean and the std.
struct GaussianLogProbGrad {
  Eigen::VectorXd d_mean;
  Eigen::VectorXd d_std;
};

inline GaussianLogProbGrad gaussian_log_prob_grad(const Eigen::VectorXd& mean,
                                                  const Eigen::VectorXd& std,
                                                  const Eigen::VectorXd& action) {
  GaussianLogProbGrad g;
  g.d_mean.resize(mean.size());
  g.d_std.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double diff = action[i] - mean[i];
    const double s = std[i];
    g.d_mean[i] = diff / (s * s);
    g.d_std[i] = -1.0 / s + diff * diff / (s * s * s);
  }
  return g;
}

struct PolicySample {
  Eigen::VectorXd action;
  double log_prob = 0.0;
};

inline PolicySample policy_sample(const Eigen::VectorXd& mean,
                                  const Eigen::VectorXd& std,
                                  std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  PolicySample s;
  s.action.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) s.action[i] = mean[i] + std[i] * n01(rng);
  s.log_prob = gaussian_log_prob(mean, std, s.action);
  return s;
}

inline double policy_entropy(const Eigen::VectorXd& std) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < std.size(); ++i) {
    h += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * std[i] * std[i]);
  }
  return h;
}

// ---- Adam ----------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

class Adam {
 public:
  Adam() = default;
  Adam(const MlpParams& shape, AdamConfig cfg)
      : cfg_(cfg), m_(zeros_like(shape)), v_(zeros_like(shape)) {}

  void step(MlpParams& p, const MlpGrads& g) {
    ++t_;
    const double lr = cfg_.learning_rate;
    if (lr == 0.0) return;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      update(p.layers[i].weight, g.layers[i].weight, m_.layers[i].weight,
             v_.layers[i].weight, lr, c1, c2);
      update(p.layers[i].bias, g.layers[i].bias, m_.layers[i].bias,
             v_.layers[i].bias, lr, c1, c2);
    }
  }

  long steps() const { return t_; }
  AdamConfig& config() { return cfg_; }

 private:
  template <typename M>
  void update(M& param, const M& grad, M& m, M& v, double lr, double c1,
              double c2) const {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  }

  AdamConfig cfg_;
  MlpParams m_;
  MlpParams v_;
  long t_ = 0;
};

/// Global L2 norm of a gradient.
inline double grad_norm(const MlpGrads& g) {
  double s = 0.0;
  for (const auto& l : g.layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(s);
}

inline void scale_grads(MlpGrads& g, double factor) {
  for (auto& l : g.layers) {
    l.weight *= factor;
    l.bias *= factor;
  }
}

// ---- text serialization --------------------------------------------------

inline void write_mlp(std::ostream& os, const std::string& name,
                      const MlpParams& p) {
  os << "network " << name << ' ' << p.layers.size() << '\n';
  for (const auto& l : p.layers) {
    os << "layer " << l.out() << ' ' << l.in() << ' ' << to_string(l.activation)
       << '\n';
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        os << (c ? " " : "") << format_double(l.weight(r, c));
      }
      os << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      os << (r ? " " : "") << format_double(l.bias[r]);
    }
    os << '\n';
  }
}

namespace detail {

inline std::string next_token(std::istream& is, const char* what) {
  std::string tok;
  if (!(is >> tok)) throw DataError(std::string("unexpected end of data reading ") + what);
  return tok;
}

inline long parse_count(const std::string& tok, const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || v < 0 || v > 1000000) {
    throw DataError(std::string("bad ") + what + " '" + tok + "'");
  }
  return v;
}

}  // namespace detail

inline MlpParams read_mlp(std::istream& is, const std::string& name) {
  if (detail::next_token(is, "network") != "network") throw DataError("expected 'network'");
  const std::string got = detail::next_token(is, "network name");
  if (got != name) throw DataError("expected network '" + name + "', found '" + got + "'");
  const long n = detail::parse_count(detail::next_token(is, "layer count"), "layer count");
  if (n < 1) throw DataError("network has no layers");
  MlpParams p;
  for (long i = 0; i < n; ++i) {
    if (detail::next_token(is, "layer") != "layer") throw DataError("expected 'layer'");
    const long rows = detail::parse_count(detail::next_token(is, "rows"), "layer rows");
    const long cols = detail::parse_count(detail::next_token(is, "cols"), "layer cols");
    if (rows < 1 || cols < 1) throw DataError("layer shape must be positive");
    DenseLayer l;
    l.activation = activation_from_string(detail::next_token(is, "activation"));
    l.weight.resize(rows, cols);
    l.bias.resize(rows);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c)
        l.weight(r, c) = parse_double(detail::next_token(is, "weight"));
    for (long r = 0; r < rows; ++r) l.bias[r] = parse_double(detail::next_token(is, "bias"));
    p.layers.push_back(std::move(l));
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return p;
}

}  // namespace crutchgait
