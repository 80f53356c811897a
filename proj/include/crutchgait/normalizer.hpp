#pragma once

// Running mean / variance observation normalizer (parallel Welford merge).

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace crutchgait {

class RunningNormalizer {
 public:
  RunningNormalizer() = default;
  explicit RunningNormalizer(int dim, double clip = 10.0)
      : mean_(dim, 0.0), m2_(dim, 0.0), clip_(clip) {}

  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  double clip() const { return clip_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& m2() const { return m2_; }

  bool enabled() const { return enabled_; }
  void set_enabled(bool on) { enabled_ = on; }
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  void update(std::span<const double> x) {
    if (frozen_ || !enabled_) return;
    check(x.size());
    count_ += 1.0;
    for (int i = 0; i < dim(); ++i) {
      const double delta = x[i] - mean_[i];
      mean_[i] += delta / count_;
      m2_[i] += delta * (x[i] - mean_[i]);
    }
  }

  double variance(int i) const { return count_ > 1.0 ? m2_[i] / count_ : 1.0; }

  std::vector<double> normalize(std::span<const double> x) const {
    check(x.size());
    std::vector<double> out(x.begin(), x.end());
    if (!enabled_) return out;
    for (int i = 0; i < dim(); ++i) {
      const double sd = std::sqrt(variance(i) + 1e-8);
      out[i] = std::clamp((x[i] - mean_[i]) / sd, -clip_, clip_);
    }
    return out;
  }

  void restore(double count, std::vector<double> mean, std::vector<double> m2) {
    if (mean.size() != m2.size()) throw std::invalid_argument("normalizer shape");
    count_ = count;
    mean_ = std::move(mean);
    m2_ = std::move(m2);
  }

  bool operator==(const RunningNormalizer&) const = default;

 private:
  void check(std::size_t n) const {
    if (static_cast<int>(n) != dim()) {
      throw std::invalid_argument("normalizer input has wrong dimension");
    }
  }

  std::vector<double> mean_;
  std::vector<double> m2_;
  double count_ = 0.0;
  double clip_ = 10.0;
  bool enabled_ = true;
  bool frozen_ = false;
};

}  // namespace crutchgait
