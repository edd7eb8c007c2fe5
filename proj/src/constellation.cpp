#include "mdshape/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mdshape {

namespace {
constexpr double kProbTol = 1e-9;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }
}  // namespace

Eigen::VectorXd Constellation::mean() const {
  return points.transpose() * probs;
}

double Constellation::energy() const {
  return (points.array().square().matrix() * Eigen::VectorXd::Ones(dims)).dot(probs);
}

double Constellation::pol_energy(int pol) const {
  const int c0 = pol * 2;
  if (c0 + 1 >= dims) return 0.0;
  Eigen::VectorXd e = points.col(c0).array().square() + points.col(c0 + 1).array().square();
  return e.dot(probs);
}

double Constellation::entropy_bits() const {
  double h = 0;
  for (int i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p > 0) h -= p * std::log2(p);
  }
  return h;
}

void Constellation::validate(bool allow_submask) const {
  const int m_pts = size();
  if (dims <= 0 || dims % 2 != 0) fail("dimension count must be positive and even, got " + std::to_string(dims));
  if (m_pts < 1) fail("constellation has no points");
  if (points.cols() != dims) fail("point matrix width does not match dims");
  if (probs.size() != m_pts) fail("probability vector length mismatch");
  if (!points.allFinite()) fail("non-finite point coordinate");
  for (int i = 0; i < m_pts; ++i) {
    if (!std::isfinite(probs[i]) || probs[i] < 0) fail("negative or non-finite probability at point " + std::to_string(i));
  }
  const double mass = probs.sum();
  if (std::abs(mass - 1.0) > kProbTol) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "probability mass %.6g != 1", mass);
    fail(buf);
  }
  if (labeled()) {
    if (static_cast<int>(labels.size()) != m_pts) fail("label count mismatch");
    if (label_bits <= 0 || label_bits > 31) fail("bad label width");
    if (!allow_submask && (1 << label_bits) != m_pts)
      fail("2^m = " + std::to_string(1 << label_bits) + " does not match M = " + std::to_string(m_pts));
    std::set<uint32_t> seen;
    for (uint32_t l : labels) {
      if (l >> label_bits) fail("label exceeds m bits");
      if (!seen.insert(l).second) fail("duplicate label");
    }
  }
}

Constellation load_constellation(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open constellation file: " + path);

  auto next_line = [&in](std::string& line) -> bool {
    while (std::getline(in, line)) {
      const auto pos = line.find('#');
      if (pos != std::string::npos) line.erase(pos);
      std::string trimmed = line;
      trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
      if (!trimmed.empty()) return true;
    }
    return false;
  };

  std::string line;
  if (!next_line(line)) fail(path + ": missing header line");
  int n = 0, m_pts = 0, m_bits = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> n >> m_pts >> m_bits)) fail(path + ": malformed header, expected 'N M m'");
  }
  if (n <= 0 || m_pts <= 0 || m_bits < 0) fail(path + ": bad header values");

  Constellation c;
  c.dims = n;
  c.points.resize(m_pts, n);
  c.probs.resize(m_pts);
  c.label_bits = m_bits;
  if (m_bits > 0) c.labels.reserve(m_pts);

  for (int i = 0; i < m_pts; ++i) {
    if (!next_line(line)) fail(path + ": expected " + std::to_string(m_pts) + " point lines");
    std::istringstream ls(line);
    for (int d = 0; d < n; ++d) {
      if (!(ls >> c.points(i, d))) fail(path + ": malformed coordinate on point " + std::to_string(i));
    }
    std::string label;
    double p;
    if (!(ls >> label >> p)) fail(path + ": malformed label/probability on point " + std::to_string(i));
    if (m_bits > 0) {
      if (static_cast<int>(label.size()) != m_bits) fail(path + ": label length != m on point " + std::to_string(i));
      uint32_t bits = 0;
      for (char ch : label) {
        if (ch != '0' && ch != '1') fail(path + ": label is not a bit string on point " + std::to_string(i));
        bits = (bits << 1) | static_cast<uint32_t>(ch - '0');
      }
      c.labels.push_back(bits);
    } else if (label != "-") {
      fail(path + ": unlabeled file must use '-' in the label column");
    }
    c.probs[i] = p;
  }

  {
    // derive name from the file stem
    auto slash = path.find_last_of("/\\");
    std::string stem = (slash == std::string::npos) ? path : path.substr(slash + 1);
    auto dot = stem.find_last_of('.');
    if (dot != std::string::npos) stem.erase(dot);
    c.name = stem;
  }
  c.validate();
  return c;
}

void save_constellation(const Constellation& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write constellation file: " + path);
  out << c.dims << ' ' << c.size() << ' ' << c.label_bits << '\n';
  char buf[64];
  for (int i = 0; i < c.size(); ++i) {
    for (int d = 0; d < c.dims; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", c.points(i, d));
      out << buf << ' ';
    }
    if (c.labeled()) {
      for (int b = c.label_bits - 1; b >= 0; --b) out << ((c.labels[i] >> b) & 1u);
    } else {
      out << '-';
    }
    std::snprintf(buf, sizeof buf, "%.17g", c.probs[i]);
    out << ' ' << buf << '\n';
  }
}

Constellation normalize_unit_energy_per_pol(Constellation c, bool remove_mean) {
  c.validate(true);
  Eigen::VectorXd mu = c.mean();
  if (remove_mean) {
    c.points.rowwise() -= mu.transpose();
  } else if (mu.cwiseAbs().maxCoeff() > 1e-9 * std::sqrt(std::max(c.energy(), 1e-300))) {
    fail("constellation is not zero mean; pass remove_mean to recenter");
  }
  if (c.dims >= 4) {
    for (int pol = 0; pol * 2 + 1 < c.dims; ++pol) {
      const double e = c.pol_energy(pol);
      if (e <= 0) fail("zero-energy polarization " + std::to_string(pol));
      const double s = 1.0 / std::sqrt(e);
      c.points.col(pol * 2) *= s;
      c.points.col(pol * 2 + 1) *= s;
    }
  } else {
    const double e = c.energy();
    if (e <= 0) fail("zero-energy constellation");
    c.points *= 1.0 / std::sqrt(e);
  }
  return c;
}

ModulationMoments moments(const Constellation& c) {
  using cd = std::complex<double>;
  ModulationMoments mm;
  cd e2ax{0, 0}, e2ay{0, 0}, eaxay{0, 0};   // E{a_x^2}, E{a_y^2}, E{a_x a_y}
  cd e3x{0, 0}, exxy{0, 0}, eyyx{0, 0};     // |a|^2-weighted odd moments
  for (int i = 0; i < c.size(); ++i) {
    const double p = c.probs[i];
    const cd x = c.ax(i), y = c.ay(i);
    const double x2 = std::norm(x), y2 = std::norm(y);
    mm.e2x += p * x2;
    mm.e4x += p * x2 * x2;
    mm.e6x += p * x2 * x2 * x2;
    mm.e2y += p * y2;
    mm.e4y += p * y2 * y2;
    mm.e6y += p * y2 * y2 * y2;
    mm.exxyy += p * x2 * y2;
    mm.exy += p * x * std::conj(y);
    mm.exxyy2 += p * x * x * std::conj(y) * std::conj(y);
    mm.e4x2y += p * x2 * x2 * y2;
    mm.e2x4y += p * x2 * y2 * y2;
    e2ax += p * x * x;
    e2ay += p * y * y;
    eaxay += p * x * y;
    e3x += p * x2 * x;
    exxy += p * x2 * x * std::conj(y);
    eyyx += p * y2 * y * std::conj(x);
  }
  mm.residual = std::max({std::abs(e2ax), std::abs(e2ay), std::abs(eaxay),
                          std::abs(e3x), std::abs(exxy), std::abs(eyyx)});
  return mm;
}

double entropy(const Constellation& c) { return c.entropy_bits(); }

Constellation maxwell_boltzmann_ps(const Constellation& base, double target_entropy_bits) {
  base.validate();
  const int m_pts = base.size();
  const double h_max = std::log2(static_cast<double>(m_pts));
  if ((base.probs.array() - 1.0 / m_pts).abs().maxCoeff() > 1e-9)
    fail("maxwell_boltzmann_ps requires a uniform base constellation");
  if (target_entropy_bits >= h_max)
    fail("target entropy >= log2(M); no shaping possible");
  if (target_entropy_bits <= 0) fail("target entropy must be positive");

  Eigen::VectorXd e(m_pts);
  for (int i = 0; i < m_pts; ++i) e[i] = base.points.row(i).squaredNorm();

  auto entropy_at = [&](double lambda) {
    Eigen::ArrayXd w = (-lambda * e.array()).exp();
    w /= w.sum();
    double h = 0;
    for (int i = 0; i < m_pts; ++i)
      if (w[i] > 0) h -= w[i] * std::log2(w[i]);
    return h;
  };

  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (entropy_at(hi) > target_entropy_bits) {
    hi *= 2;
    if (++guard > 200) fail("target entropy too small for bisection bracket");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (entropy_at(mid) > target_entropy_bits ? lo : hi) = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  if (std::abs(entropy_at(lambda) - target_entropy_bits) > 1e-6)
    fail("entropy bisection did not converge to 1e-6 bits");

  Constellation out = base;
  Eigen::ArrayXd w = (-lambda * e.array()).exp();
  out.probs = (w / w.sum()).matrix();
  out.name = base.name + "_ps";
  return out;
}

std::vector<long> quantize_to_type(const Eigen::VectorXd& dist, long n) {
  const int q = static_cast<int>(dist.size());
  if (q == 0) fail("empty distribution");
  if (n < 1) fail("blocklength must be >= 1");

  // largest-remainder start
  std::vector<long> k(q);
  std::vector<std::pair<double, int>> rem(q);
  long total = 0;
  for (int i = 0; i < q; ++i) {
    const double target = dist[i] * static_cast<double>(n);
    k[i] = static_cast<long>(std::floor(target));
    rem[i] = {target - static_cast<double>(k[i]), i};
    total += k[i];
  }
  std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (int j = 0; total < n; ++j, ++total) k[rem[j % q].second]++;

  // local swaps: move one count between symbols while KL(dist || k/n) improves
  auto kl = [&](const std::vector<long>& kk) {
    double v = 0;
    for (int i = 0; i < q; ++i) {
      if (dist[i] <= 0) continue;
      if (kk[i] == 0) return std::numeric_limits<double>::infinity();
      v += dist[i] * std::log2(dist[i] * static_cast<double>(n) / static_cast<double>(kk[i]));
    }
    return v;
  };
  bool improved = true;
  while (improved) {
    improved = false;
    double best = kl(k);
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < q; ++j) {
        if (i == j || k[i] == 0) continue;
        k[i]--; k[j]++;
        const double v = kl(k);
        if (v + 1e-15 < best) { best = v; improved = true; }
        else { k[i]++; k[j]--; }
      }
    }
  }
  return k;
}

double ccdm_rate_loss(const Eigen::VectorXd& dist, long n) {
  if (dist.size() == 0) fail("empty distribution");
  if (n < 1) fail("blocklength must be >= 1");
  double h = 0;
  for (int i = 0; i < dist.size(); ++i) {
    if (dist[i] < 0) fail("negative probability");
    if (dist[i] > 0) h -= dist[i] * std::log2(dist[i]);
  }
  const auto k = quantize_to_type(dist, n);
  // log2 multinomial(n; k_1..k_q) via log-gamma, safe at n = 10000
  double log2_mult = std::lgamma(static_cast<double>(n) + 1);
  for (long ki : k) log2_mult -= std::lgamma(static_cast<double>(ki) + 1);
  log2_mult /= std::log(2.0);
  const double rl = h - log2_mult / static_cast<double>(n);
  return std::max(rl, 0.0);
}

EnergyHistogram energy_distribution(const Constellation& c) {
  c.validate(true);
  std::vector<std::pair<double, double>> ep(c.size());
  for (int i = 0; i < c.size(); ++i)
    ep[i] = {c.points.row(i).squaredNorm(), c.probs[i]};
  std::sort(ep.begin(), ep.end());

  EnergyHistogram h;
  h.mean_energy = c.energy();
  constexpr double kMergeTol = 1e-9;
  for (const auto& [e, p] : ep) {
    if (!h.energies.empty() && e - h.energies.back() <= kMergeTol * std::max(1.0, h.mean_energy)) {
      // probability-weighted bin center keeps the histogram mean exact
      const double w = h.masses.back() + p;
      if (w > 0) h.energies.back() = (h.energies.back() * h.masses.back() + e * p) / w;
      h.masses.back() = w;
    } else {
      h.energies.push_back(e);
      h.masses.push_back(p);
    }
  }
  h.groups.resize(h.energies.size());
  for (size_t i = 0; i < h.energies.size(); ++i) {
    if (h.energies[i] < 0.75 * h.mean_energy) h.groups[i] = 0;
    else if (h.energies[i] > 1.25 * h.mean_energy) h.groups[i] = 2;
    else h.groups[i] = 1;
  }
  return h;
}

void write_energy_csv(const EnergyHistogram& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  static const char* names[] = {"low", "medium", "high"};
  out << "energy,probability,group\n";
  char buf[96];
  for (size_t i = 0; i < h.energies.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%s\n", h.energies[i], h.masses[i], names[h.groups[i]]);
    out << buf;
  }
}

}  // namespace mdshape
