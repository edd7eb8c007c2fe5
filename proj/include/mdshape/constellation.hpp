#pragma once

#include <Eigen/Core>
#include <complex>
#include <string>
#include <vector>

namespace mdshape {

// N-dimensional constellation: point coordinates, binary labels and a
// probability distribution. Dimension pairs form complex quadratures:
// dims 0-1 = x-pol I/Q, dims 2-3 = y-pol I/Q.
struct Constellation {
  std::string name;
  int dims = 0;                   // N, even
  Eigen::MatrixXd points;         // M x N
  std::vector<uint32_t> labels;   // size M; empty when unlabeled
  int label_bits = 0;             // m = log2(M) for labeled formats
  Eigen::VectorXd probs;          // size M, sums to 1

  int size() const { return static_cast<int>(points.rows()); }
  bool labeled() const { return !labels.empty(); }

  // x-pol symbol of point i as a complex amplitude (dims 0,1)
  std::complex<double> ax(int i) const { return {points(i, 0), points(i, 1)}; }
  // y-pol symbol; zero for 2D formats
  std::complex<double> ay(int i) const {
    return dims >= 4 ? std::complex<double>{points(i, 2), points(i, 3)} : 0.0;
  }

  Eigen::VectorXd mean() const;
  double energy() const;          // E[||X||^2]
  double pol_energy(int pol) const;  // E[|a_x|^2] (pol=0) or E[|a_y|^2] (pol=1)
  double entropy_bits() const;    // -sum p log2 p

  // Throws std::invalid_argument on any violated invariant.
  void validate(bool allow_submask = false) const;
};

// Intra- and cross-polarization moments of a zero-mean constellation,
// normalized power units. Inputs to the modulation-dependent NLI terms.
struct ModulationMoments {
  double e2x = 0, e4x = 0, e6x = 0;   // E{|a_x|^2}, E{|a_x|^4}, E{|a_x|^6}
  double e2y = 0, e4y = 0, e6y = 0;
  double exxyy = 0;                   // E{|a_x|^2 |a_y|^2}
  std::complex<double> exy{0, 0};     // E{a_x a_y*}
  std::complex<double> exxyy2{0, 0};  // E{a_x^2 (a_y*)^2}
  double e4x2y = 0;                   // E{|a_x|^4 |a_y|^2}
  double e2x4y = 0;                   // E{|a_x|^2 |a_y|^4}

  // Largest magnitude among the moments the closed-form tables assume to
  // vanish (E{a_p^2}, E{a_x a_y}, odd moments, E{|a_p|^2 a_p a_q*}).
  double residual = 0;
};

struct EnergyHistogram {
  std::vector<double> energies;       // distinct per-4D-symbol energies
  std::vector<double> masses;         // matching probabilities
  std::vector<int> groups;            // 0=low, 1=medium, 2=high
  double mean_energy = 0;             // E[||X||^2]
};

Constellation load_constellation(const std::string& path);
void save_constellation(const Constellation& c, const std::string& path);

// Rescales so that E{|a_x|^2} = E{|a_y|^2} = 1 for 4D formats (independently
// per polarization) or E[||X||^2] = 1 for 2D formats.
Constellation normalize_unit_energy_per_pol(Constellation c, bool remove_mean = false);

ModulationMoments moments(const Constellation& c);
double entropy(const Constellation& c);

// Maxwell-Boltzmann probabilities exp(-lambda ||x||^2) on a uniform base,
// lambda solved by bisection to hit the target entropy within 1e-6 bits.
Constellation maxwell_boltzmann_ps(const Constellation& base, double target_entropy_bits);

// CCDM rate loss in bits per symbol for blocklength n: the distribution is
// quantized to an n-type and R_L = H(p) - log2(multinomial)/n.
double ccdm_rate_loss(const Eigen::VectorXd& dist, long n);
std::vector<long> quantize_to_type(const Eigen::VectorXd& dist, long n);

EnergyHistogram energy_distribution(const Constellation& c);
void write_energy_csv(const EnergyHistogram& h, const std::string& path);

}  // namespace mdshape
