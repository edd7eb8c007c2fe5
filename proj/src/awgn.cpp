#include "mdshape/awgn.hpp"

#include <cmath>
#include <stdexcept>

#include "mdshape/rng.hpp"

namespace mdshape {

namespace {

double snr_lin(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

// per-real-dimension noise sigma for the per-2D SNR convention
double noise_sigma(const Constellation& c, double snr_db) {
  const double es2d = c.energy() / (c.dims / 2);
  return std::sqrt(es2d / (2.0 * snr_lin(snr_db)));
}

int nominal_bits(const Constellation& c) {
  if (c.labeled()) return c.label_bits;
  const int m = static_cast<int>(std::lround(std::log2(static_cast<double>(c.size()))));
  if ((1 << m) != c.size())
    throw std::invalid_argument("unlabeled constellation size is not a power of two");
  return m;
}

struct GhGrid {
  Eigen::MatrixXd z;       // K x N node vectors
  Eigen::VectorXd logw;    // log of tensor weights (weight fn exp(-|z|^2))
  Eigen::VectorXd znorm2;  // |z_k|^2
};

GhGrid make_gh_grid(int nodes, int dims) {
  std::vector<double> x, w;
  gauss_hermite_nodes(nodes, x, w);
  long total = 1;
  for (int d = 0; d < dims; ++d) total *= nodes;
  GhGrid g;
  g.z.resize(total, dims);
  g.logw.resize(total);
  g.znorm2.resize(total);
  std::vector<int> idx(dims, 0);
  for (long k = 0; k < total; ++k) {
    double lw = 0, n2 = 0;
    for (int d = 0; d < dims; ++d) {
      g.z(k, d) = x[idx[d]];
      lw += std::log(w[idx[d]]);
      n2 += x[idx[d]] * x[idx[d]];
    }
    g.logw[k] = lw;
    g.znorm2[k] = n2;
    for (int d = dims - 1; d >= 0; --d) {
      if (++idx[d] < nodes) break;
      idx[d] = 0;
    }
  }
  return g;
}

// log sum_j exp(t_j) over points given y; also fills bit posteriors when
// bit_num != nullptr (length m, accumulates exp terms for bit=1 subsets).
struct MetricWorkspace {
  std::vector<double> t;
};

double log_mixture(const Eigen::MatrixXd& pts, const Eigen::VectorXd& logp,
                   const double* y, double inv2s2, MetricWorkspace& ws,
                   const std::vector<uint32_t>* labels, int mbits, double* bit_num) {
  const int m_pts = static_cast<int>(pts.rows());
  const int n = static_cast<int>(pts.cols());
  ws.t.resize(m_pts);
  double tmax = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < m_pts; ++j) {
    double d2 = 0;
    for (int d = 0; d < n; ++d) {
      const double diff = y[d] - pts(j, d);
      d2 += diff * diff;
    }
    const double t = -d2 * inv2s2 + logp[j];
    ws.t[j] = t;
    if (t > tmax) tmax = t;
  }
  double denom = 0;
  if (bit_num) std::fill(bit_num, bit_num + mbits, 0.0);
  for (int j = 0; j < m_pts; ++j) {
    const double e = std::exp(ws.t[j] - tmax);
    denom += e;
    if (bit_num) {
      const uint32_t l = (*labels)[j];
      for (int b = 0; b < mbits; ++b)
        if ((l >> (mbits - 1 - b)) & 1u) bit_num[b] += e;
    }
  }
  if (bit_num)
    for (int b = 0; b < mbits; ++b) bit_num[b] /= denom;
  return tmax + std::log(denom);
}

double binary_entropy(double p) {
  double h = 0;
  if (p > 0 && p < 1) h = -p * std::log2(p) - (1 - p) * std::log2(1 - p);
  return h;
}

Eigen::VectorXd log_probs(const Constellation& c) {
  Eigen::VectorXd lp(c.size());
  for (int i = 0; i < c.size(); ++i)
    lp[i] = c.probs[i] > 0 ? std::log(c.probs[i]) : -1e300;
  return lp;
}

}  // namespace

namespace detail {

// Straightforward single-thread reference for the Gauss-Hermite MI sum.
double mi_gh_serial(const Eigen::MatrixXd& pts, const Eigen::VectorXd& probs,
                    const Eigen::VectorXd& logp, double sigma, int nodes) {
  const int n = static_cast<int>(pts.cols());
  const GhGrid g = make_gh_grid(nodes, n);
  const double inv2s2 = 1.0 / (2 * sigma * sigma);
  const double lognorm = -0.5 * n * std::log(M_PI);
  MetricWorkspace ws;
  std::vector<double> y(n);
  double mi = 0;
  for (int i = 0; i < pts.rows(); ++i) {
    if (probs[i] <= 0) continue;
    double acc = 0;
    for (long k = 0; k < g.z.rows(); ++k) {
      for (int d = 0; d < n; ++d) y[d] = pts(i, d) + M_SQRT2 * sigma * g.z(k, d);
      const double lse = log_mixture(pts, logp, y.data(), inv2s2, ws, nullptr, 0, nullptr);
      acc += std::exp(g.logw[k] + lognorm) * (-g.znorm2[k] - lse);
    }
    mi += probs[i] * acc;
  }
  return mi / std::log(2.0) + 0.0;
}

double mi_gh_parallel(const Eigen::MatrixXd& pts, const Eigen::VectorXd& probs,
                      const Eigen::VectorXd& logp, double sigma, int nodes) {
  const int n = static_cast<int>(pts.cols());
  const GhGrid g = make_gh_grid(nodes, n);
  const double inv2s2 = 1.0 / (2 * sigma * sigma);
  const double lognorm = -0.5 * n * std::log(M_PI);
  const int m_pts = static_cast<int>(pts.rows());
  double mi = 0;
#pragma omp parallel
  {
    MetricWorkspace ws;
    std::vector<double> y(n);
#pragma omp for reduction(+ : mi) schedule(dynamic)
    for (int i = 0; i < m_pts; ++i) {
      if (probs[i] <= 0) continue;
      double acc = 0;
      for (long k = 0; k < g.z.rows(); ++k) {
        for (int d = 0; d < n; ++d) y[d] = pts(i, d) + M_SQRT2 * sigma * g.z(k, d);
        const double lse = log_mixture(pts, logp, y.data(), inv2s2, ws, nullptr, 0, nullptr);
        acc += std::exp(g.logw[k] + lognorm) * (-g.znorm2[k] - lse);
      }
      mi += probs[i] * acc;
    }
  }
  return mi / std::log(2.0);
}

}  // namespace detail

void gauss_hermite_nodes(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("need at least one quadrature node");
  x.assign(n, 0);
  w.assign(n, 0);
  const double eps = 3e-14;
  const int m = (n + 1) / 2;
  double z = 0, pp = 0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -1.0 / 6.0);
    else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * x[0];
    else if (i == 3) z = 1.91 * z - 0.91 * x[1];
    else z = 2.0 * z - x[i - 2];
    for (int it = 0; it < 100; ++it) {
      double p1 = std::pow(M_PI, -0.25), p2 = 0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= eps) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
}

RatePoint mi_awgn(const Constellation& c, const AwgnChannelSpec& chan, const AirParams& params) {
  c.validate(true);
  if (!std::isfinite(chan.snr_db)) throw std::invalid_argument("non-finite SNR");
  const double sigma = noise_sigma(c, chan.snr_db);
  const Eigen::VectorXd lp = log_probs(c);

  RatePoint r;
  if (params.estimator == AirEstimator::gauss_hermite) {
    if (c.dims > 4) throw std::invalid_argument("gauss_hermite estimator requires N <= 4");
    r.rate = detail::mi_gh_parallel(c.points, c.probs, lp, sigma, params.gh_nodes);
    r.stderr_bits = 0;
  } else {
    if (params.samples < 10'000) throw std::invalid_argument("monte_carlo needs >= 1e4 samples");
    Rng rng(params.seed);
    DiscreteSampler pick(c.probs);
    const double inv2s2 = 1.0 / (2 * sigma * sigma);
    double sum = 0, sum2 = 0;
    MetricWorkspace ws;
    std::vector<double> y(c.dims);
    for (long s = 0; s < params.samples; ++s) {
      const int i = pick(rng);
      double zn2 = 0;
      for (int d = 0; d < c.dims; ++d) {
        const double z = rng.normal();
        y[d] = c.points(i, d) + sigma * z;
        zn2 += z * z;
      }
      const double lse = log_mixture(c.points, lp, y.data(), inv2s2, ws, nullptr, 0, nullptr);
      const double v = (-0.5 * zn2 - lse) / std::log(2.0);
      sum += v;
      sum2 += v * v;
    }
    r.rate = sum / params.samples;
    const double var = std::max(0.0, sum2 / params.samples - r.rate * r.rate);
    r.stderr_bits = std::sqrt(var / params.samples);
  }
  r.normalized = normalized_rate(std::max(r.rate, 0.0), c);
  return r;
}

RatePoint gmi_awgn(const Constellation& c, const AwgnChannelSpec& chan, const AirParams& params) {
  c.validate(true);
  if (!c.labeled()) throw std::invalid_argument("GMI requires a labeled constellation");
  const double sigma = noise_sigma(c, chan.snr_db);
  const double inv2s2 = 1.0 / (2 * sigma * sigma);
  const Eigen::VectorXd lp = log_probs(c);
  const int mbits = c.label_bits;
  const double hx = c.entropy_bits();

  double cond = 0, se = 0;
  if (params.estimator == AirEstimator::gauss_hermite) {
    if (c.dims > 4) throw std::invalid_argument("gauss_hermite estimator requires N <= 4");
    const GhGrid g = make_gh_grid(params.gh_nodes, c.dims);
    const double lognorm = -0.5 * c.dims * std::log(M_PI);
    const int m_pts = c.size();
#pragma omp parallel
    {
      MetricWorkspace ws;
      std::vector<double> y(c.dims), bitp(mbits);
#pragma omp for reduction(+ : cond) schedule(dynamic)
      for (int i = 0; i < m_pts; ++i) {
        if (c.probs[i] <= 0) continue;
        double acc = 0;
        for (long k = 0; k < g.z.rows(); ++k) {
          for (int d = 0; d < c.dims; ++d) y[d] = c.points(i, d) + M_SQRT2 * sigma * g.z(k, d);
          log_mixture(c.points, lp, y.data(), inv2s2, ws, &c.labels, mbits, bitp.data());
          double hsum = 0;
          for (int b = 0; b < mbits; ++b) hsum += binary_entropy(bitp[b]);
          acc += std::exp(g.logw[k] + lognorm) * hsum;
        }
        cond += c.probs[i] * acc;
      }
    }
  } else {
    if (params.samples < 10'000) throw std::invalid_argument("monte_carlo needs >= 1e4 samples");
    Rng rng(params.seed);
    DiscreteSampler pick(c.probs);
    MetricWorkspace ws;
    std::vector<double> y(c.dims), bitp(mbits);
    double sum = 0, sum2 = 0;
    for (long s = 0; s < params.samples; ++s) {
      const int i = pick(rng);
      for (int d = 0; d < c.dims; ++d) y[d] = c.points(i, d) + sigma * rng.normal();
      log_mixture(c.points, lp, y.data(), inv2s2, ws, &c.labels, mbits, bitp.data());
      double hsum = 0;
      for (int b = 0; b < mbits; ++b) hsum += binary_entropy(bitp[b]);
      sum += hsum;
      sum2 += hsum * hsum;
    }
    cond = sum / params.samples;
    const double var = std::max(0.0, sum2 / params.samples - cond * cond);
    se = std::sqrt(var / params.samples);
  }

  RatePoint r;
  r.rate = std::max(0.0, hx - cond);
  r.stderr_bits = se;
  r.normalized = normalized_rate(r.rate, c);
  return r;
}

RatePoint air_awgn(const Constellation& c, Metric metric, const AwgnChannelSpec& chan,
                   const AirParams& params) {
  return metric == Metric::MI ? mi_awgn(c, chan, params) : gmi_awgn(c, chan, params);
}

double normalized_rate(double rate_bits, const Constellation& c) {
  const double h = c.entropy_bits();
  if (rate_bits < -1e-12 || rate_bits > h + 1e-9)
    throw std::invalid_argument("rate outside [0, H(X)]");
  return 1.0 - (h - rate_bits) / nominal_bits(c);
}

double required_snr(const Constellation& c, Metric metric, double target_normalized,
                    const RequiredSnrParams& params) {
  if (params.tol_db <= 0) throw std::invalid_argument("tol_db must be positive");
  if (target_normalized <= 0) return params.lo_db;

  auto f = [&](double snr_db) {
    return air_awgn(c, metric, {snr_db, c.dims}, params.air).normalized - target_normalized;
  };
  double lo = params.lo_db, hi = params.hi_db;
  if (f(hi) < 0)
    throw std::runtime_error("target normalized rate unreachable at " + std::to_string(hi) +
                             " dB (metric saturates below target)");
  if (f(lo) >= 0) return lo;
  while (hi - lo > params.tol_db) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double shannon_required_snr(double se_bits_per_4d, double target_normalized) {
  if (se_bits_per_4d <= 0) throw std::invalid_argument("spectral efficiency must be positive");
  const double r2d = se_bits_per_4d * target_normalized / 2.0;
  if (r2d <= 0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(std::pow(2.0, r2d) - 1.0);
}

double effective_se_bits_4d(const Constellation& c, double target_normalized) {
  // rate at the target is R = H - m(1-R*); the Gaussian baseline runs at the
  // same rate, C = se * R*. Reduces to (4/N) m for uniform formats.
  const double h = c.entropy_bits();
  const int m = nominal_bits(c);
  return 4.0 / c.dims * (h - m * (1.0 - target_normalized)) / target_normalized;
}

double delta_snr_req(const Constellation& c, Metric metric, double target_normalized,
                     const RequiredSnrParams& params) {
  const double req = required_snr(c, metric, target_normalized, params);
  return req - shannon_required_snr(effective_se_bits_4d(c, target_normalized), target_normalized);
}

}  // namespace mdshape
