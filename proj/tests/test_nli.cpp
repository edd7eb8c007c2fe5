#include <doctest.h>

#include <cmath>
#include <complex>

#include "mdshape/formats.hpp"
#include "mdshape/link.hpp"
#include "mdshape/nli.hpp"
#include "mdshape/quad.hpp"
#include "src/nli_internal.hpp"

using namespace mdshape;
using namespace mdshape::nli_detail;

namespace {

LinkConfig test_link(int spans) {
  LinkConfig l;
  l.span_length_km = 80;
  l.num_spans = spans;
  l.alpha_db_per_km = 0.2;
  l.dispersion_ps_nm_km = 17;
  l.gamma_per_w_km = 1.3;
  l.noise_figure_db = 5;
  return l;
}

WdmConfig test_wdm(int channels) {
  WdmConfig w;
  w.num_channels = channels;
  w.symbol_rate_hz = 32e9;
  w.channel_spacing_hz = 37.5e9;
  w.rolloff = 0.1;
  w.launch_power_dbm = 0;
  return w;
}

// x-pol QPSK with y-pol 16QAM: polarization-asymmetric fourth moments
Constellation mixed_pol_format() {
  Constellation x = make_qpsk(), y = make_square_qam(16);
  Constellation c;
  c.name = "qpsk-x-16qam-y";
  c.dims = 4;
  c.points.resize(x.size() * y.size(), 4);
  c.probs.resize(x.size() * y.size());
  int idx = 0;
  for (int i = 0; i < x.size(); ++i)
    for (int j = 0; j < y.size(); ++j, ++idx) {
      c.points(idx, 0) = x.points(i, 0);
      c.points(idx, 1) = x.points(i, 1);
      c.points(idx, 2) = y.points(j, 0);
      c.points(idx, 3) = y.points(j, 1);
      c.probs[idx] = x.probs[i] * y.probs[j];
    }
  return normalize_unit_energy_per_pol(c);
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("pattern and class enumeration counts") {
  CHECK(variance_patterns().size() == 41);  // partitions of 6 without singletons
  CHECK(rotation_patterns().size() == 4);
  CHECK(enumerate_classes(11).size() == 91);
  CHECK(enumerate_classes(3).size() == 7);
}

TEST_CASE("moment providers and cumulants") {
  GaussianMoments g(1.0, 1.0);
  const SymbolVar xp{0, false}, xc{0, true};
  std::vector<SymbolVar> v4{xp, xc, xp, xc};
  CHECK(g.moment(v4).real() == doctest::Approx(2.0));       // E|z|^4 = 2 e^2
  CHECK(std::abs(joint_cumulant(g, v4)) < 1e-12);           // Gaussian kurtosis cumulant

  ConstellationMoments q(make_format("pm-qpsk"));
  CHECK(q.moment(v4).real() == doctest::Approx(1.0));       // constant modulus
  CHECK(joint_cumulant(q, v4).real() == doctest::Approx(-1.0));  // E|a|^4 - 2 = -1

  // cross-polarization block of a PM format factorizes, cumulant vanishes
  const SymbolVar yp{1, false}, yc{1, true};
  std::vector<SymbolVar> cross{xp, xc, yp, yc};
  CHECK(std::abs(joint_cumulant(q, cross)) < 1e-12);
}

TEST_CASE("link kernel basics") {
  KernelEngine eng(test_link(4), test_wdm(3), {});
  const double leff = test_link(1).effective_length_m();
  CHECK(std::abs(eng.link_kernel(0.0) - std::complex<double>(4 * leff, 0)) < 1e-6 * leff);
  // Lorentzian decay of |zeta|
  CHECK(std::abs(eng.link_kernel(1e-3)) < std::abs(eng.link_kernel(0.0)));
}

TEST_CASE("pattern integral against a brute-force 3D grid (single span)") {
  LinkConfig link = test_link(1);
  link.dispersion_ps_nm_km = 4;  // widen the kernel so a tensor grid resolves it
  const WdmConfig wdm = test_wdm(3);
  NliQuadOptions opts;
  auto eng = shared_engine(link, wdm, opts);

  // D-pattern {0,3}{1,4}{2,5} on the XPM class pair (n,n,0)^2:
  //   J = T^-3 int P^2(f) P^2(f1-nu) P^2(f2-nu) P^2(f3) |K|^2
  const auto& pats = variance_patterns();
  int pd = -1;
  for (size_t i = 0; i < pats.size(); ++i) {
    auto p = pats[i];
    for (auto& b : p) std::sort(b.begin(), b.end());
    std::sort(p.begin(), p.end());
    if (p == Pattern{{0, 3}, {1, 4}, {2, 5}}) pd = static_cast<int>(i);
  }
  REQUIRE(pd >= 0);

  const TripletClass x1{{1, 1, 0}};
  const std::complex<double> j_engine = eng->pattern_integral(x1, x1, pd);

  Pulse pulse;
  pulse.T = wdm.symbol_period_s();
  pulse.roll = wdm.rolloff;
  pulse.half_bw = (1 + wdm.rolloff) / (2 * pulse.T);
  const double nu = wdm.channel_spacing_hz;
  const double b = 4 * M_PI * M_PI * link.beta2();
  KernelEngine keng(link, wdm, opts);

  std::vector<double> gx, gw;
  const int n = 120;
  gauss_legendre_nodes(n, gx, gw);
  const double w = pulse.half_bw;
  double brute = 0;
  for (int i = 0; i < n; ++i) {
    const double f = w * gx[i];
    const double pf = pulse.eval(f);
    if (pf == 0) continue;
    for (int k = 0; k < n; ++k) {
      const double f1 = nu + w * gx[k];
      const double p1 = pulse.eval(f1 - nu);
      if (p1 == 0) continue;
      double inner = 0;
      for (int l = 0; l < n; ++l) {
        const double f2 = nu + w * gx[l];
        const double p2 = pulse.eval(f2 - nu);
        if (p2 == 0) continue;
        const double f3 = f - f1 + f2;
        const double p3 = pulse.eval(f3);
        if (p3 == 0) continue;
        const double db = b * (f1 - f) * (f1 - f2);
        inner += gw[l] * w * p2 * p2 * p3 * p3 * std::norm(keng.link_kernel(db));
      }
      brute += gw[i] * w * gw[k] * w * pf * pf * p1 * p1 * inner;
    }
  }
  brute /= std::pow(pulse.T, 3);

  CHECK(rel_diff(j_engine.real(), brute) < 0.02);
  CHECK(std::abs(j_engine.imag()) < 0.02 * std::abs(j_engine.real()));
}

TEST_CASE("rotation kernel for the paired block equals Ns Leff / T") {
  const LinkConfig link = test_link(4);
  const WdmConfig wdm = test_wdm(3);
  auto eng = shared_engine(link, wdm, {});
  const auto& rp = rotation_patterns();
  int pid = -1;
  for (size_t i = 0; i < rp.size(); ++i) {
    auto p = rp[i];
    for (auto& blk : p) std::sort(blk.begin(), blk.end());
    std::sort(p.begin(), p.end());
    if (p == Pattern{{0, 1}, {2, 3}}) pid = static_cast<int>(i);
  }
  REQUIRE(pid >= 0);
  const TripletClass x1{{1, 1, 0}};
  const auto j = eng->rotation_integral(x1, pid);
  const double expect = link.num_spans * link.effective_length_m() / wdm.symbol_period_s();
  CHECK(j.real() == doctest::Approx(expect).epsilon(0.01));
  CHECK(std::abs(j.imag()) < 1e-3 * expect);
}

TEST_CASE("XPM integrals: symmetry and multi-span growth") {
  const LinkConfig l1 = test_link(1), l2 = test_link(2);
  const WdmConfig wdm = test_wdm(5);
  const XpmIntegrals a = link_integrals(l1, wdm, 1);
  const XpmIntegrals b = link_integrals(l1, wdm, -1);
  CHECK(a.mu1 == doctest::Approx(b.mu1).epsilon(1e-9));
  CHECK(a.mu2 == doctest::Approx(b.mu2).epsilon(1e-9));
  CHECK(a.mu3 == doctest::Approx(b.mu3).epsilon(1e-9));

  const XpmIntegrals c = link_integrals(l2, wdm, 1);
  CHECK(c.mu1 >= a.mu1);           // coherent accumulation never loses power
  CHECK(c.mu1 >= 1.5 * a.mu1);     // and grows roughly with the span count

  CHECK_THROWS_AS(link_integrals(l1, wdm, 0), std::invalid_argument);
  CHECK_THROWS_AS(link_integrals(l1, wdm, 7), std::invalid_argument);
}

TEST_CASE("xpm_term structure") {
  XpmIntegrals mu{2.0, 0.7, -0.3};
  SUBCASE("Gaussian moments leave only the modulation-independent part") {
    ModulationMoments g;
    g.e2x = g.e2y = 1;
    g.e4x = g.e4y = 2;
    g.e6x = g.e6y = 6;
    g.exxyy = 1;
    CHECK(xpm_term(g, mu, 1.0) == doctest::Approx(4 * mu.mu1 - 8 * mu.mu3).epsilon(1e-12));
  }
  SUBCASE("linearity in Phi") {
    ModulationMoments m = moments(make_format("pm-qpsk"));
    const double v1 = xpm_term(m, mu, 1.0);
    CHECK(xpm_term(m, mu, 3.5) == doctest::Approx(3.5 * v1).epsilon(1e-12));
  }
  SUBCASE("sub-Gaussian kurtosis reduces the X1 power") {
    ModulationMoments m = moments(make_format("pm-qpsk"));  // E|a|^4 = E^2|a|^2
    ModulationMoments g;
    g.e2x = g.e2y = 1;
    g.e4x = g.e4y = 2;
    g.exxyy = 1;
    XpmIntegrals mup{2.0, 0.7, -0.3};
    CHECK(xpm_term(m, mup, 1.0) < xpm_term(g, mup, 1.0));
  }
}

TEST_CASE("closed-form X1 equals the engine on the X1 diagonal") {
  const LinkConfig link = test_link(2);
  const WdmConfig wdm = test_wdm(3);
  NliQuadOptions opts;
  auto eng = shared_engine(link, wdm, opts);
  const TripletClass x1{{1, 1, 0}};

  for (const char* name : {"pm-qpsk", "pm-16qam", "so-pm-qpsk"}) {
    CAPTURE(name);
    const Constellation c = make_format(name);
    const ModulationMoments mm = moments(c);
    ConstellationMoments mp(c);

    // engine-side: sum every compatible variance pattern on (X1, X1) plus the
    // class's own phase-rotation correction
    std::complex<double> acc = 0;
    const int chan[6] = {1, 1, 0, 1, 1, 0};
    const auto& vpats = variance_patterns();
    for (size_t pid = 0; pid < vpats.size(); ++pid) {
      bool ok = true;
      for (const auto& blk : vpats[pid])
        for (int s : blk)
          if (chan[s] != chan[blk[0]]) ok = false;
      if (!ok) continue;
      std::complex<double> mom = 0;
      for (int a = 0; a < 2; ++a)
        for (int bb = 0; bb < 2; ++bb) {
          std::complex<double> prod = 1;
          for (const auto& blk : vpats[pid]) {
            std::vector<SymbolVar> vars;
            for (int s : blk) {
              static const bool conj6[6] = {false, true, false, true, false, true};
              const int pol = s == 2 || s == 5 ? 0 : (s < 3 ? a : bb);
              vars.push_back({static_cast<uint8_t>(pol), conj6[s]});
            }
            prod *= joint_cumulant(mp, vars);
          }
          mom += prod;
        }
      if (std::abs(mom) < 1e-13) continue;
      acc += mom * eng->pattern_integral(x1, x1, static_cast<int>(pid));
    }
    // rotation correction (single compatible pattern {0,1}{2,ext})
    const auto& rpats = rotation_patterns();
    double rot = 0;
    for (size_t pid = 0; pid < rpats.size(); ++pid) {
      bool ok = true;
      const int chan4[4] = {1, 1, 0, 0};
      for (const auto& blk : rpats[pid])
        for (int s : blk)
          if (chan4[s] != chan4[blk[0]]) ok = false;
      if (!ok) continue;
      std::complex<double> mom = 0;
      for (int a = 0; a < 2; ++a) {
        std::complex<double> prod = 1;
        for (const auto& blk : rpats[pid]) {
          std::vector<SymbolVar> vars;
          for (int s : blk) {
            static const bool conj4[4] = {false, true, false, true};
            const int pol = s >= 2 ? 0 : a;
            vars.push_back({static_cast<uint8_t>(pol), conj4[s]});
          }
          prod *= joint_cumulant(mp, vars);
        }
        mom += prod;
      }
      rot += (mom * eng->rotation_integral(x1, static_cast<int>(pid))).real();
    }
    const double engine_x1 = acc.real() - rot * rot / mm.e2x;

    // closed form: gamma~^2 folded into the mu's, Phi in normalized units
    const XpmIntegrals mu = link_integrals(link, wdm, 1, opts);
    const double g = link.gamma_per_w_m() * 8.0 / 9.0;
    const double closed = xpm_term(mm, mu, mm.e2x * mm.e2x * mm.e2x) / (g * g);

    CHECK(rel_diff(engine_x1, closed) < 1e-9);
  }
}

TEST_CASE("eta_total structural properties on a small link") {
  const LinkConfig link = test_link(2);
  const WdmConfig wdm = test_wdm(3);
  NliQuadOptions opts;

  SUBCASE("GN limit: mod_indep equals the Gaussian-moment eta") {
    const NliBreakdown full = eta_total(make_format("pm-qpsk"), link, wdm, opts);
    const NliBreakdown gn = eta_gn_gaussian(link, wdm, opts);
    CHECK(rel_diff(full.sci_x.mod_indep, gn.sci_x.mod_indep) < 1e-12);
    CHECK(rel_diff(full.xci_x.mod_indep, gn.xci_x.mod_indep) < 1e-12);
    CHECK(rel_diff(full.eta_x + full.eta_y - (full.sci_x.total() + full.xci_x.total() +
                                              full.mci_x.total() + full.sci_y.total() +
                                              full.xci_y.total() + full.mci_y.total()),
                   0.0) < 1e-12);
  }

  SUBCASE("EGN equivalence for PM-2D inputs, per component") {
    for (const char* name : {"pm-qpsk", "pm-16qam"}) {
      CAPTURE(name);
      const Constellation c = make_format(name);
      const NliBreakdown a = eta_total(c, link, wdm, opts);
      const NliBreakdown b = eta_total_egn(c, link, wdm, opts);
      CHECK(rel_diff(a.eta_x, b.eta_x) < 1e-9);
      CHECK(rel_diff(a.eta_y, b.eta_y) < 1e-9);
      CHECK(rel_diff(a.sci_x.total(), b.sci_x.total()) < 1e-9);
      CHECK(rel_diff(a.xci_x.total(), b.xci_x.total()) < 1e-9);
    }
  }

  SUBCASE("polarization-symmetric formats have eta_x = eta_y") {
    const NliBreakdown e = eta_total(make_format("pm-16qam"), link, wdm, opts);
    CHECK(rel_diff(e.eta_x, e.eta_y) < 1e-9);
  }

  SUBCASE("point permutation and joint phase rotation leave eta unchanged") {
    Constellation c = make_format("so-pm-qpsk");
    const NliBreakdown base = eta_total(c, link, wdm, opts);

    Constellation perm = c;
    perm.points.colwise().reverseInPlace();
    perm.probs.reverseInPlace();
    perm.labels.clear();
    perm.label_bits = 0;
    const NliBreakdown p = eta_total(perm, link, wdm, opts);
    CHECK(rel_diff(base.eta_x, p.eta_x) < 1e-9);

    Constellation rot = c;
    const double th = M_PI / 7;
    for (int i = 0; i < rot.size(); ++i) {
      const auto x = rot.ax(i) * std::polar(1.0, th);
      const auto y = rot.ay(i) * std::polar(1.0, th);
      rot.points(i, 0) = x.real();
      rot.points(i, 1) = x.imag();
      rot.points(i, 2) = y.real();
      rot.points(i, 3) = y.imag();
    }
    const NliBreakdown r = eta_total(rot, link, wdm, opts);
    CHECK(rel_diff(base.eta_x, r.eta_x) < 1e-9);
    CHECK(rel_diff(base.eta_y, r.eta_y) < 1e-9);
  }

  SUBCASE("x/y swap symmetry for an asymmetric format") {
    Constellation c = mixed_pol_format();
    Constellation swapped = c;
    swapped.points.col(0).swap(swapped.points.col(2));
    swapped.points.col(1).swap(swapped.points.col(3));
    const NliBreakdown a = eta_total(c, link, wdm, opts);
    const NliBreakdown b = eta_total(swapped, link, wdm, opts);
    CHECK(rel_diff(a.eta_x, b.eta_y) < 1e-9);
    CHECK(rel_diff(a.eta_y, b.eta_x) < 1e-9);
  }

  SUBCASE("sub-Gaussian formats do not exceed the Gaussian eta") {
    const NliBreakdown gn = eta_gn_gaussian(link, wdm, opts);
    for (const char* name : {"pm-qpsk", "pm-16qam", "pm-64qam", "so-pm-qpsk"}) {
      const NliBreakdown e = eta_total(make_format(name), link, wdm, opts);
      CHECK(e.eta_total() <= gn.eta_total() * (1 + 1e-9));
    }
  }

  SUBCASE("non-zero-mean input is rejected") {
    Constellation c = make_format("pm-qpsk");
    c.points.col(0).array() += 0.2;
    CHECK_THROWS_AS(eta_total(c, link, wdm, opts), std::invalid_argument);
  }
}

TEST_CASE("effective SNR and the launch-power optimum") {
  const LinkConfig link = test_link(4);
  const WdmConfig wdm = test_wdm(5);
  NliQuadOptions opts;
  const NliBreakdown eta = eta_total(make_format("pm-qpsk"), link, wdm, opts);
  const LaunchOptimum opt = optimal_launch_power(eta, link, wdm);

  SUBCASE("closed form beats a 0.01 dB grid search") {
    double best = -1e9, best_p = 0;
    for (double p = opt.p_opt_dbm - 3; p <= opt.p_opt_dbm + 3; p += 0.01) {
      const double s = effective_snr_db(eta, link, wdm, p);
      if (s > best) {
        best = s;
        best_p = p;
      }
    }
    CHECK(std::abs(best_p - opt.p_opt_dbm) <= 0.011);
    CHECK(std::abs(best - opt.snr_eff_db) <= 1e-3);
  }

  SUBCASE("identities at the optimum") {
    const double ase = ase_power_total(link, wdm.symbol_rate_hz);
    const double p_opt = 1e-3 * std::pow(10, opt.p_opt_dbm / 10);
    CHECK(eta.eta_total() * p_opt * p_opt * p_opt == doctest::Approx(ase / 2).epsilon(1e-9));
    CHECK(opt.snr_eff_db ==
          doctest::Approx(10 * std::log10(p_opt / (1.5 * ase))).epsilon(1e-12));
  }

  SUBCASE("linear asymptote and -2 dB/dB slope") {
    const double ase = ase_power_total(link, wdm.symbol_rate_hz);
    const double p_low = opt.p_opt_dbm - 15;
    const double lin = 10 * std::log10(1e-3 * std::pow(10, p_low / 10) / ase);
    CHECK(std::abs(effective_snr_db(eta, link, wdm, p_low) - lin) < 0.01);
    const double s1 = effective_snr_db(eta, link, wdm, opt.p_opt_dbm + 10);
    const double s2 = effective_snr_db(eta, link, wdm, opt.p_opt_dbm + 11);
    CHECK(std::abs((s2 - s1) - (-2.0)) < 0.05);
  }

  SUBCASE("unimodal in launch power") {
    int sign_flips = 0;
    double prev = effective_snr_db(eta, link, wdm, opt.p_opt_dbm - 6);
    double prev_slope = 0;
    for (double p = opt.p_opt_dbm - 6 + 0.05; p <= opt.p_opt_dbm + 6; p += 0.05) {
      const double cur = effective_snr_db(eta, link, wdm, p);
      const double slope = cur - prev;
      if (prev_slope != 0 && ((slope < 0) != (prev_slope < 0))) ++sign_flips;
      prev_slope = slope;
      prev = cur;
    }
    CHECK(sign_flips == 1);
  }

  SUBCASE("scaling: quadrupled eta shifts the optimum by known amounts") {
    NliBreakdown e4 = eta;
    e4.eta_x *= 4;
    e4.eta_y *= 4;
    const LaunchOptimum o4 = optimal_launch_power(e4, link, wdm);
    CHECK(o4.p_opt_dbm - opt.p_opt_dbm ==
          doctest::Approx(10.0 / 3 * std::log10(0.25)).epsilon(1e-9));
    CHECK(opt.snr_eff_db - o4.snr_eff_db ==
          doctest::Approx(10.0 / 3 * std::log10(4.0)).epsilon(1e-9));
  }
}

TEST_CASE("ASE power") {
  const LinkConfig l1 = test_link(1), l2 = test_link(2);
  CHECK(ase_power(l2, 45e9) == doctest::Approx(2 * ase_power(l1, 45e9)).epsilon(1e-12));
  CHECK(ase_power(l1, 0) == doctest::Approx(0.0));
  CHECK(ase_power(l1, 45e9) > 0);
  CHECK(ase_power_total(l1, 45e9) == doctest::Approx(2 * ase_power(l1, 45e9)).epsilon(1e-12));
}
