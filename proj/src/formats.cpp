#include "mdshape/formats.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace mdshape {

namespace {

uint32_t gray(uint32_t n) { return n ^ (n >> 1); }

Constellation finish(Constellation c) {
  c = normalize_unit_energy_per_pol(std::move(c));
  c.validate();
  return c;
}

// Labels for the star-8QAM in ring order (inner 45/135/225/315 deg, then
// outer 0/90/180/270 deg), exhaustive-search result maximizing GMI at the
// R*=0.8 operating point.
constexpr uint32_t kStar8Labels[8] = {0, 1, 3, 2, 6, 4, 5, 7};

// Quasi-Gray labels for the 32-cross in row-major point order (corners
// removed), produced by pair-swap descent on GMI at 13 dB.
constexpr uint32_t kCross32Labels[32] = {
    0,  1,  3,  2,  4,  5,  7,  6,  12, 13, 15, 14, 8,  9,  11, 10,
    24, 25, 27, 26, 16, 17, 19, 18, 20, 21, 23, 22, 28, 29, 31, 30};

}  // namespace

Constellation make_square_qam(int m_points) {
  const int levels = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m_points))));
  if (levels * levels != m_points) throw std::invalid_argument("square QAM needs a square M");
  const int bits_per_axis = static_cast<int>(std::lround(std::log2(levels)));
  if ((1 << bits_per_axis) != levels) throw std::invalid_argument("square QAM needs M = 4^k");

  Constellation c;
  c.name = std::to_string(m_points) + "qam";
  c.dims = 2;
  c.points.resize(m_points, 2);
  c.probs = Eigen::VectorXd::Constant(m_points, 1.0 / m_points);
  c.label_bits = 2 * bits_per_axis;
  c.labels.resize(m_points);
  int idx = 0;
  for (int i = 0; i < levels; ++i) {
    for (int q = 0; q < levels; ++q, ++idx) {
      c.points(idx, 0) = 2 * i - levels + 1;
      c.points(idx, 1) = 2 * q - levels + 1;
      c.labels[idx] = (gray(i) << bits_per_axis) | gray(q);
    }
  }
  return finish(std::move(c));
}

Constellation make_cross_qam(int m_points) {
  int side, corner;
  if (m_points == 32) { side = 6; corner = 1; }
  else if (m_points == 128) { side = 12; corner = 2; }
  else throw std::invalid_argument("cross QAM supports M = 32 or 128");

  Constellation c;
  c.name = std::to_string(m_points) + "qam";
  c.dims = 2;
  c.points.resize(m_points, 2);
  c.probs = Eigen::VectorXd::Constant(m_points, 1.0 / m_points);
  int idx = 0;
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      const bool corner_cell = (i < corner || i >= side - corner) && (j < corner || j >= side - corner);
      if (corner_cell) continue;
      c.points(idx, 0) = 2 * i - side + 1;
      c.points(idx, 1) = 2 * j - side + 1;
      ++idx;
    }
  }
  if (m_points == 32) {
    c.label_bits = 5;
    c.labels.assign(kCross32Labels, kCross32Labels + 32);
  }
  return finish(std::move(c));
}

Constellation make_8qam(EightQamVariant v) {
  Constellation c;
  c.dims = 2;
  c.points.resize(8, 2);
  c.probs = Eigen::VectorXd::Constant(8, 0.125);
  switch (v) {
    case EightQamVariant::star: {
      c.name = "8qam";
      const double b = 1.0 + std::sqrt(3.0);
      for (int k = 0; k < 4; ++k) {
        const double phi = M_PI / 4 + k * M_PI / 2;
        c.points(k, 0) = M_SQRT2 * std::cos(phi);
        c.points(k, 1) = M_SQRT2 * std::sin(phi);
        c.points(4 + k, 0) = b * std::cos(k * M_PI / 2);
        c.points(4 + k, 1) = b * std::sin(k * M_PI / 2);
      }
      c.label_bits = 3;
      c.labels.assign(kStar8Labels, kStar8Labels + 8);
      break;
    }
    case EightQamVariant::rect: {
      c.name = "8qam-rect";
      int idx = 0;
      for (int i = 0; i < 4; ++i) {
        for (int q = 0; q < 2; ++q, ++idx) {
          c.points(idx, 0) = 2 * i - 3;
          c.points(idx, 1) = 2 * q - 1;
          c.labels.push_back((gray(static_cast<uint32_t>(i)) << 1) | static_cast<uint32_t>(q));
        }
      }
      c.label_bits = 3;
      break;
    }
    case EightQamVariant::circ: {
      c.name = "8qam-circ";
      c.points(0, 0) = 0;
      c.points(0, 1) = 0;
      for (int k = 0; k < 7; ++k) {
        c.points(1 + k, 0) = std::cos(2 * M_PI * k / 7);
        c.points(1 + k, 1) = std::sin(2 * M_PI * k / 7);
      }
      c.label_bits = 3;
      for (uint32_t k = 0; k < 8; ++k) c.labels.push_back(k);
      break;
    }
  }
  return finish(std::move(c));
}

Constellation make_qpsk() {
  Constellation c;
  c.name = "qpsk";
  c.dims = 2;
  c.points.resize(4, 2);
  c.probs = Eigen::VectorXd::Constant(4, 0.25);
  c.label_bits = 2;
  int idx = 0;
  for (int i = 0; i < 2; ++i)
    for (int q = 0; q < 2; ++q, ++idx) {
      c.points(idx, 0) = 2 * i - 1;
      c.points(idx, 1) = 2 * q - 1;
      c.labels.push_back((static_cast<uint32_t>(i) << 1) | static_cast<uint32_t>(q));
    }
  return finish(std::move(c));
}

Constellation make_bpsk() {
  Constellation c;
  c.name = "bpsk";
  c.dims = 2;
  c.points.resize(2, 2);
  c.points << -1, 0, 1, 0;
  c.probs = Eigen::VectorXd::Constant(2, 0.5);
  c.label_bits = 1;
  c.labels = {0, 1};
  return finish(std::move(c));
}

Constellation pm_product(const Constellation& c2d) {
  c2d.validate(true);
  if (c2d.dims != 2) throw std::invalid_argument("pm_product expects a 2D constellation");
  const int m2 = c2d.size();
  Constellation c;
  c.name = "pm-" + c2d.name;
  c.dims = 4;
  c.points.resize(m2 * m2, 4);
  c.probs.resize(m2 * m2);
  const bool lab = c2d.labeled();
  c.label_bits = lab ? 2 * c2d.label_bits : 0;
  int idx = 0;
  for (int i = 0; i < m2; ++i) {
    for (int j = 0; j < m2; ++j, ++idx) {
      c.points(idx, 0) = c2d.points(i, 0);
      c.points(idx, 1) = c2d.points(i, 1);
      c.points(idx, 2) = c2d.points(j, 0);
      c.points(idx, 3) = c2d.points(j, 1);
      c.probs[idx] = c2d.probs[i] * c2d.probs[j];
      if (lab) c.labels.push_back((c2d.labels[i] << c2d.label_bits) | c2d.labels[j]);
    }
  }
  return finish(std::move(c));
}

Constellation make_so_pm_qpsk() {
  Constellation c;
  c.name = "so-pm-qpsk";
  c.dims = 4;
  c.points.resize(8, 4);
  c.probs = Eigen::VectorXd::Constant(8, 0.125);
  c.label_bits = 3;
  int idx = 0;
  for (int s = 0; s < 16; ++s) {
    const int b0 = (s >> 3) & 1, b1 = (s >> 2) & 1, b2 = (s >> 1) & 1, b3 = s & 1;
    if ((b0 ^ b1 ^ b2 ^ b3) != 0) continue;  // even-parity subset
    c.points(idx, 0) = b0 ? 1 : -1;
    c.points(idx, 1) = b1 ? 1 : -1;
    c.points(idx, 2) = b2 ? 1 : -1;
    c.points(idx, 3) = b3 ? 1 : -1;
    c.labels.push_back(static_cast<uint32_t>((b0 << 2) | (b1 << 1) | b2));
    ++idx;
  }
  return finish(std::move(c));
}

Constellation make_prs64(double rho, double delta) {
  if (rho <= 0) throw std::invalid_argument("ring ratio must be positive");
  Constellation c;
  c.name = "prs64";
  c.dims = 4;
  c.points.resize(64, 4);
  c.probs = Eigen::VectorXd::Constant(64, 1.0 / 64);
  c.label_bits = 6;
  const double r[2] = {1.0, rho};
  int idx = 0;
  for (int kx = 0; kx < 8; ++kx) {
    for (int ky = 0; ky < 8; ++ky, ++idx) {
      const int s = (kx + ky) & 1;  // data-driven ring switch
      const double phx = 2 * M_PI * kx / 8 + (s ? delta : 0.0);
      const double phy = 2 * M_PI * ky / 8 + (s ? 0.0 : delta);
      c.points(idx, 0) = r[s] * std::cos(phx);
      c.points(idx, 1) = r[s] * std::sin(phx);
      c.points(idx, 2) = r[1 - s] * std::cos(phy);
      c.points(idx, 3) = r[1 - s] * std::sin(phy);
      c.labels.push_back((gray(static_cast<uint32_t>(kx)) << 3) | gray(static_cast<uint32_t>(ky)));
    }
  }
  return finish(std::move(c));
}

Constellation make_format(const std::string& name) {
  if (name == "qpsk") return make_qpsk();
  if (name == "bpsk") return make_bpsk();
  if (name == "8qam") return make_8qam(EightQamVariant::star);
  if (name == "8qam-rect") return make_8qam(EightQamVariant::rect);
  if (name == "8qam-circ") return make_8qam(EightQamVariant::circ);
  if (name == "16qam") return make_square_qam(16);
  if (name == "32qam") return make_cross_qam(32);
  if (name == "64qam") return make_square_qam(64);
  if (name == "128qam") return make_cross_qam(128);
  if (name == "256qam") return make_square_qam(256);
  if (name == "so-pm-qpsk") return make_so_pm_qpsk();
  if (name.rfind("pm-", 0) == 0) {
    Constellation c = pm_product(make_format(name.substr(3)));
    c.name = name;
    return c;
  }
  std::string avail;
  for (const auto& n : builtin_format_names()) avail += (avail.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown format '" + name + "'; built-ins: " + avail);
}

std::vector<std::string> builtin_format_names() {
  return {"bpsk", "qpsk", "8qam", "8qam-rect", "8qam-circ", "16qam", "32qam", "64qam",
          "128qam", "256qam", "pm-qpsk", "pm-8qam", "pm-16qam", "pm-32qam", "pm-64qam",
          "so-pm-qpsk"};
  }

}  // namespace mdshape
