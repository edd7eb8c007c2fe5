#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace mdshape {

// Deterministic samplers on top of mt19937_64. std::normal_distribution is
// implementation-defined, so Gaussian draws use an explicit Box-Muller to
// keep run manifests reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform() {
    // 53-bit mantissa in [0,1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0;
  bool have_spare_ = false;
};

// Inverse-CDF sampler over a fixed discrete distribution.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const Eigen::VectorXd& probs) {
    cdf_.resize(probs.size());
    double acc = 0;
    for (int i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      cdf_[i] = acc;
    }
    if (!cdf_.empty()) cdf_.back() = 1.0;
  }

  int operator()(Rng& rng) const {
    const double u = rng.uniform();
    return static_cast<int>(std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace mdshape
