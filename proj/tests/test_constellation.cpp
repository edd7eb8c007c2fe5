#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mdshape/constellation.hpp"
#include "mdshape/formats.hpp"

using namespace mdshape;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string("./") + name;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("point file round trip for QPSK") {
  write_file(tmp_path("qpsk_test.pts"),
             "# a comment\n"
             "2 4 2\n"
             "-0.70710678118654746 -0.70710678118654746 00 0.25\n"
             "-0.70710678118654746 0.70710678118654746 01 0.25\n"
             "0.70710678118654746 -0.70710678118654746 10 0.25\n"
             "0.70710678118654746 0.70710678118654746 11 0.25\n");
  Constellation c = load_constellation(tmp_path("qpsk_test.pts"));
  CHECK(c.dims == 2);
  CHECK(c.size() == 4);
  CHECK(c.label_bits == 2);
  CHECK(c.labels[2] == 2);

  save_constellation(c, tmp_path("qpsk_test2.pts"));
  Constellation c2 = load_constellation(tmp_path("qpsk_test2.pts"));
  CHECK(c2.points == c.points);  // bit-exact for finite decimals
  CHECK(c2.probs == c.probs);
  CHECK(c2.labels == c.labels);
}

TEST_CASE("loader rejects bad probability mass") {
  write_file(tmp_path("badmass.pts"),
             "2 2 1\n"
             "-1 0 0 0.49\n"
             "1 0 1 0.49\n");
  CHECK_THROWS_WITH_AS(load_constellation(tmp_path("badmass.pts")),
                       doctest::Contains("probability mass 0.98"), std::invalid_argument);
}

TEST_CASE("loader rejects duplicates, NaN and odd dimension") {
  write_file(tmp_path("dup.pts"), "2 2 1\n-1 0 0 0.5\n1 0 0 0.5\n");
  CHECK_THROWS_AS(load_constellation(tmp_path("dup.pts")), std::invalid_argument);
  write_file(tmp_path("nan.pts"), "2 2 1\nnan 0 0 0.5\n1 0 1 0.5\n");
  CHECK_THROWS_AS(load_constellation(tmp_path("nan.pts")), std::invalid_argument);
  write_file(tmp_path("odd.pts"), "3 2 1\n-1 0 0 0 0.5\n1 0 0 1 0.5\n");
  CHECK_THROWS_AS(load_constellation(tmp_path("odd.pts")), std::invalid_argument);
}

TEST_CASE("PM-16QAM product loads with zero per-dimension mean") {
  Constellation c = make_format("pm-16qam");
  CHECK(c.dims == 4);
  CHECK(c.size() == 256);
  CHECK(c.label_bits == 8);
  CHECK(c.mean().cwiseAbs().maxCoeff() < 1e-12);
  save_constellation(c, tmp_path("pm16.pts"));
  Constellation c2 = load_constellation(tmp_path("pm16.pts"));
  CHECK(c2.mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(c2.points == c.points);
}

TEST_CASE("normalization") {
  SUBCASE("QPSK with radius 3 scales to unit energy") {
    Constellation c = make_qpsk();
    c.points *= 3.0;
    Constellation n = normalize_unit_energy_per_pol(c);
    CHECK(n.energy() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(n.points(0, 0)) == doctest::Approx(M_SQRT1_2).epsilon(1e-12));
  }
  SUBCASE("PM-8QAM has unit energy per polarization") {
    Constellation c = make_format("pm-8qam");
    CHECK(c.pol_energy(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.pol_energy(1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("asymmetric 4D rescales each polarization independently") {
    Constellation c = make_format("pm-qpsk");
    c.points.col(0) *= std::sqrt(0.8);
    c.points.col(1) *= std::sqrt(0.8);
    c.points.col(2) *= std::sqrt(1.2);
    c.points.col(3) *= std::sqrt(1.2);
    CHECK(c.pol_energy(0) == doctest::Approx(0.8));
    CHECK(c.pol_energy(1) == doctest::Approx(1.2));
    Constellation n = normalize_unit_energy_per_pol(c);
    CHECK(n.pol_energy(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(n.pol_energy(1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("idempotent") {
    Constellation c = make_format("pm-16qam");
    Constellation n1 = normalize_unit_energy_per_pol(c);
    Constellation n2 = normalize_unit_energy_per_pol(n1);
    CHECK((n2.points - n1.points).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("zero-energy polarization rejected") {
    Constellation c = make_format("pm-qpsk");
    c.points.col(2).setZero();
    c.points.col(3).setZero();
    CHECK_THROWS_AS(normalize_unit_energy_per_pol(c), std::invalid_argument);
  }
}

TEST_CASE("moments") {
  SUBCASE("PM-QPSK is constant modulus per polarization") {
    auto m = moments(make_format("pm-qpsk"));
    CHECK(m.e4x / (m.e2x * m.e2x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.e4y / (m.e2y * m.e2y) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("16QAM kurtosis ratio is 1.32") {
    // oracle: levels +-1,+-3 per axis give E|a|^2 = 10, E|a|^4 = 132
    auto m = moments(pm_product(make_square_qam(16)));
    CHECK(m.e4x / (m.e2x * m.e2x) == doctest::Approx(1.32).epsilon(1e-12));
  }
  SUBCASE("PM products factor across polarizations") {
    auto m = moments(make_format("pm-16qam"));
    CHECK(m.exxyy == doctest::Approx(m.e2x * m.e2y).epsilon(1e-12));
    CHECK(std::abs(m.exy) < 1e-12);
    CHECK(std::abs(m.exxyy2) < 1e-12);
    CHECK(m.e4x2y == doctest::Approx(m.e4x * m.e2y).epsilon(1e-12));
  }
  SUBCASE("Cauchy-Schwarz on the cross moment") {
    for (const char* n : {"pm-8qam", "pm-16qam", "so-pm-qpsk"}) {
      auto m = moments(make_format(n));
      CHECK(m.exxyy <= std::sqrt(m.e4x * m.e4y) + 1e-12);
    }
  }
}

TEST_CASE("entropy") {
  Constellation c = make_square_qam(64);
  CHECK(entropy(c) == doctest::Approx(6.0).epsilon(1e-12));

  Constellation d = make_qpsk();
  d.probs << 1, 0, 0, 0;
  CHECK(entropy(d) == doctest::Approx(0.0));

  // invariant under permutation
  Constellation p = make_square_qam(16);
  p.probs.reverseInPlace();
  p.points.colwise().reverseInPlace();
  CHECK(entropy(p) == doctest::Approx(entropy(make_square_qam(16))).epsilon(1e-12));
}

TEST_CASE("Maxwell-Boltzmann shaping") {
  SUBCASE("hits the paper's PS-64QAM entropy of 8.8 bit/4D") {
    Constellation ps = maxwell_boltzmann_ps(make_format("pm-64qam"), 8.8);
    CHECK(entropy(ps) == doctest::Approx(8.8).epsilon(1e-7));
  }
  SUBCASE("PM-16QAM shaped to 6.4 bit/4D") {
    Constellation ps = maxwell_boltzmann_ps(make_format("pm-16qam"), 6.4);
    CHECK(entropy(ps) == doctest::Approx(6.4).epsilon(1e-7));
    // heavier mass on lower-energy points
    int imin = 0, imax = 0;
    Eigen::VectorXd e(ps.size());
    for (int i = 0; i < ps.size(); ++i) {
      e[i] = ps.points.row(i).squaredNorm();
      if (e[i] < e[imin]) imin = i;
      if (e[i] > e[imax]) imax = i;
    }
    CHECK(ps.probs[imin] > ps.probs[imax]);
  }
  SUBCASE("target near log2 M gives a near-uniform distribution") {
    Constellation ps = maxwell_boltzmann_ps(make_format("pm-16qam"), 8.0 - 1e-6);
    CHECK((ps.probs.array() - 1.0 / 256).abs().maxCoeff() < 1e-5);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(maxwell_boltzmann_ps(make_format("pm-qpsk"), 4.0), std::invalid_argument);
    // constant-modulus base: entropy is flat in lambda, no bracket exists
    CHECK_THROWS_AS(maxwell_boltzmann_ps(make_format("pm-qpsk"), 3.0), std::invalid_argument);
    Constellation shaped = maxwell_boltzmann_ps(make_format("pm-16qam"), 6.4);
    CHECK_THROWS_AS(maxwell_boltzmann_ps(shaped, 6.0), std::invalid_argument);
  }
}

TEST_CASE("CCDM rate loss") {
  SUBCASE("n=4 with a fair binary distribution") {
    Eigen::VectorXd p(2);
    p << 0.5, 0.5;
    // multinomial(4;2,2) = 6
    CHECK(ccdm_rate_loss(p, 4) == doctest::Approx(1.0 - std::log2(6.0) / 4.0).epsilon(1e-12));
  }
  SUBCASE("long blocks lose little") {
    Eigen::VectorXd p(4);
    p << 0.4, 0.3, 0.2, 0.1;
    CHECK(ccdm_rate_loss(p, 10000) < 0.01);
  }
  SUBCASE("single symbol alphabet has zero loss") {
    Eigen::VectorXd p(1);
    p << 1.0;
    CHECK(ccdm_rate_loss(p, 100) == doctest::Approx(0.0));
  }
  SUBCASE("nonincreasing along doubling sequences") {
    Eigen::VectorXd p(3);
    p << 0.5, 0.3, 0.2;
    double prev = ccdm_rate_loss(p, 50);
    for (long n : {100L, 200L, 400L}) {
      const double rl = ccdm_rate_loss(p, n);
      CHECK(rl <= prev + 1e-12);
      prev = rl;
    }
  }
  SUBCASE("errors") {
    Eigen::VectorXd p(2);
    p << 0.5, 0.5;
    CHECK_THROWS_AS(ccdm_rate_loss(p, 0), std::invalid_argument);
    CHECK_THROWS_AS(ccdm_rate_loss(Eigen::VectorXd(), 4), std::invalid_argument);
  }
}

TEST_CASE("energy distribution") {
  SUBCASE("PM-QPSK is single-bin") {
    auto h = energy_distribution(make_format("pm-qpsk"));
    CHECK(h.energies.size() == 1);
    CHECK(h.energies[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(h.masses[0] == doctest::Approx(1.0));
    CHECK(h.groups[0] == 1);
  }
  SUBCASE("PM-16QAM has the five multinomial bins") {
    auto h = energy_distribution(make_format("pm-16qam"));
    REQUIRE(h.energies.size() == 5);
    const double want_e[] = {0.4, 1.2, 2.0, 2.8, 3.6};
    const double want_m[] = {0.0625, 0.25, 0.375, 0.25, 0.0625};
    for (int i = 0; i < 5; ++i) {
      CHECK(h.energies[i] == doctest::Approx(want_e[i]).epsilon(1e-9));
      CHECK(h.masses[i] == doctest::Approx(want_m[i]).epsilon(1e-12));
    }
    CHECK(h.groups.front() == 0);
    CHECK(h.groups.back() == 2);
  }
  SUBCASE("histogram mean matches the constellation energy") {
    for (const char* n : {"pm-8qam", "pm-32qam", "so-pm-qpsk"}) {
      Constellation c = make_format(n);
      auto h = energy_distribution(c);
      double mean = 0;
      for (size_t i = 0; i < h.energies.size(); ++i) mean += h.energies[i] * h.masses[i];
      CHECK(mean == doctest::Approx(c.energy()).epsilon(1e-9));
    }
  }
}

TEST_CASE("energy csv export") {
  auto h = energy_distribution(make_format("pm-16qam"));
  write_energy_csv(h, tmp_path("hist.csv"));
  std::ifstream in(tmp_path("hist.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "energy,probability,group");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 5);
}
