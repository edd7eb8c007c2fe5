#pragma once

#include "mdshape/constellation.hpp"

namespace mdshape {

// SNR convention: average symbol energy per complex dimension over complex
// noise variance, i.e. per-real-dimension noise variance is
// sigma^2 = E_s2D / (2 * SNR_lin) with E_s2D = E[||X||^2] / (N/2).
struct AwgnChannelSpec {
  double snr_db = 0;
  int dims = 2;
};

struct RatePoint {
  double rate = 0;        // bits per N-dim symbol
  double normalized = 0;  // R* = 1 - (H(X) - R)/m
  double stderr_bits = 0; // 0 for deterministic quadrature
};

enum class AirEstimator { gauss_hermite, monte_carlo };
enum class Metric { MI, GMI };

struct AirParams {
  AirEstimator estimator = AirEstimator::gauss_hermite;
  long samples = 1'000'000;  // monte_carlo sample count
  uint64_t seed = 1;
  int gh_nodes = 10;         // quadrature nodes per real dimension
};

RatePoint mi_awgn(const Constellation& c, const AwgnChannelSpec& chan, const AirParams& params = {});
RatePoint gmi_awgn(const Constellation& c, const AwgnChannelSpec& chan, const AirParams& params = {});
RatePoint air_awgn(const Constellation& c, Metric metric, const AwgnChannelSpec& chan,
                   const AirParams& params = {});

double normalized_rate(double rate_bits, const Constellation& c);

struct RequiredSnrParams {
  double tol_db = 0.02;
  double lo_db = -10;
  double hi_db = 40;
  AirParams air;
};

// Bisection on SNR until the normalized metric crosses the target. Throws
// std::runtime_error when the target is unreachable at the upper bracket.
double required_snr(const Constellation& c, Metric metric, double target_normalized,
                    const RequiredSnrParams& params = {});

// Gaussian-modulation baseline: per-2D rate r = se * target / 2 and
// SNR = 2^r - 1, in dB.
double shannon_required_snr(double se_bits_per_4d, double target_normalized);

double delta_snr_req(const Constellation& c, Metric metric, double target_normalized,
                     const RequiredSnrParams& params = {});

// SE at the operating point: (4/N)(H(X) - m(1 - R*))/R*, = (4/N) m for
// uniform formats. This is the rate the Gaussian baseline is held to.
double effective_se_bits_4d(const Constellation& c, double target_normalized);

// Gauss-Hermite abscissas/weights for exp(-x^2) on n nodes.
void gauss_hermite_nodes(int n, std::vector<double>& x, std::vector<double>& w);

}  // namespace mdshape
