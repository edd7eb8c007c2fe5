#include "mdshape/nli.hpp"
#include "src/nli_internal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace mdshape {
namespace nli_detail {

namespace {

uint64_t multiset_key(std::span<const SymbolVar> vars) {
  // counts of (pol, conj) categories; moments depend only on the multiset
  std::array<uint64_t, 4> n{};
  for (const auto& v : vars) n[v.pol * 2 + (v.conj ? 1 : 0)]++;
  return n[0] | (n[1] << 8) | (n[2] << 16) | (n[3] << 24);
}

}  // namespace

ConstellationMoments::ConstellationMoments(const Constellation& c) {
  const int m = c.size();
  ax_.resize(m);
  ay_.resize(m);
  p_.resize(m);
  for (int i = 0; i < m; ++i) {
    ax_[i] = c.ax(i);
    ay_[i] = c.ay(i);
    p_[i] = c.probs[i];
  }
}

cplx ConstellationMoments::moment(std::span<const SymbolVar> vars) const {
  const uint64_t key = multiset_key(vars);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const int nx_p = key & 0xff, nx_c = (key >> 8) & 0xff;
  const int ny_p = (key >> 16) & 0xff, ny_c = (key >> 24) & 0xff;
  cplx acc = 0;
  for (size_t i = 0; i < p_.size(); ++i) {
    cplx t = p_[i];
    for (int k = 0; k < nx_p; ++k) t *= ax_[i];
    for (int k = 0; k < nx_c; ++k) t *= std::conj(ax_[i]);
    for (int k = 0; k < ny_p; ++k) t *= ay_[i];
    for (int k = 0; k < ny_c; ++k) t *= std::conj(ay_[i]);
    acc += t;
  }
  std::lock_guard<std::mutex> lock(mu_);
  cache_.emplace(key, acc);
  return acc;
}

cplx GaussianMoments::moment(std::span<const SymbolVar> vars) const {
  // Wick: nonzero only when each polarization balances plain/conjugate;
  // n matched pairs of one polarization contribute n! e2^n.
  const uint64_t key = multiset_key(vars);
  const int nx_p = key & 0xff, nx_c = (key >> 8) & 0xff;
  const int ny_p = (key >> 16) & 0xff, ny_c = (key >> 24) & 0xff;
  if (nx_p != nx_c || ny_p != ny_c) return 0.0;
  double v = 1;
  for (int k = 1; k <= nx_p; ++k) v *= k * e2_[0];
  for (int k = 1; k <= ny_p; ++k) v *= k * e2_[1];
  return v;
}

cplx FactorizedMoments::moment(std::span<const SymbolVar> vars) const {
  std::vector<SymbolVar> xs, ys;
  for (const auto& v : vars) (v.pol == 0 ? xs : ys).push_back(v);
  cplx mx = xs.empty() ? cplx(1, 0) : base_.moment(xs);
  cplx my = ys.empty() ? cplx(1, 0) : base_.moment(ys);
  return mx * my;
}

cplx joint_cumulant(const MomentProvider& mp, std::span<const SymbolVar> vars) {
  const int n = static_cast<int>(vars.size());
  if (n == 0) return 1.0;
  // moments of all subsets, then kappa(S) = m(S) - sum_{T proper subset of S,
  // T containing element 0} kappa(T) m(S \ T)
  const int full = (1 << n) - 1;
  std::vector<cplx> mom(full + 1), kap(full + 1);
  std::vector<SymbolVar> buf;
  for (int mask = 1; mask <= full; ++mask) {
    buf.clear();
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) buf.push_back(vars[i]);
    mom[mask] = mp.moment(buf);
  }
  for (int mask = 1; mask <= full; ++mask) {
    if (!(mask & 1)) continue;  // only subsets containing element 0 are needed
    cplx k = mom[mask];
    // proper subsets T of mask with bit0 set
    for (int t = (mask - 1) & mask; t; t = (t - 1) & mask) {
      if (!(t & 1)) continue;
      const int rest = mask & ~t;
      k -= kap[t] * mom[rest];
    }
    kap[mask] = k;
  }
  return kap[full];
}

}  // namespace nli_detail

// =====================================================================
// assembly

namespace {

using namespace nli_detail;

struct SupportSig {
  std::set<int> chans;  // non-COI channels involved
  bool operator<(const SupportSig& o) const { return chans < o.chans; }
  int bucket() const { return chans.empty() ? 0 : (chans.size() == 1 ? 1 : 2); }
};

SupportSig class_support(const TripletClass& c) {
  SupportSig s;
  for (int ch : c.c)
    if (ch != 0) s.chans.insert(ch);
  return s;
}

SupportSig pair_support(const TripletClass& a, const TripletClass& b) {
  SupportSig s = class_support(a);
  for (int ch : b.c)
    if (ch != 0) s.chans.insert(ch);
  return s;
}

bool class_touches(const TripletClass& c, int n) {
  return c.c[0] == n || c.c[1] == n || c.c[2] == n;
}

struct CumulantCache {
  const MomentProvider* mp;
  std::map<uint64_t, cplx> memo;

  cplx block_cumulant(std::span<const SymbolVar> vars) {
    uint64_t key = 0;
    for (const auto& v : vars) key = key * 5 + (v.pol * 2 + (v.conj ? 1 : 0)) + 1;
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    const cplx k = joint_cumulant(*mp, vars);
    memo.emplace(key, k);
    return k;
  }
};

// slot (pol, conj) assignment for a variance pattern given the polarization
// pair (alpha for the unprimed triple, beta for the primed) and output pol
std::array<SymbolVar, 6> variance_slots(int alpha, int beta, int out_pol) {
  return {{{static_cast<uint8_t>(alpha), false},
           {static_cast<uint8_t>(alpha), true},
           {static_cast<uint8_t>(out_pol), false},
           {static_cast<uint8_t>(beta), true},
           {static_cast<uint8_t>(beta), false},
           {static_cast<uint8_t>(out_pol), true}}};
}

std::array<SymbolVar, 4> rotation_slots(int alpha, int out_pol) {
  return {{{static_cast<uint8_t>(alpha), false},
           {static_cast<uint8_t>(alpha), true},
           {static_cast<uint8_t>(out_pol), false},
           {static_cast<uint8_t>(out_pol), true}}};  // slot 3 = external conj
}

// sum over polarization combos of the per-block cumulant products
cplx pattern_moment(CumulantCache& cc, const Pattern& pat, bool rotation, int out_pol) {
  cplx total = 0;
  const int nalpha = 2, nbeta = rotation ? 1 : 2;
  std::vector<SymbolVar> blockvars;
  for (int a = 0; a < nalpha; ++a) {
    for (int b = 0; b < nbeta; ++b) {
      cplx prod = 1;
      if (rotation) {
        const auto sv = rotation_slots(a, out_pol);
        for (const auto& block : pat) {
          blockvars.clear();
          for (int s : block) blockvars.push_back(sv[s]);
          prod *= cc.block_cumulant(blockvars);
          if (prod == 0.0) break;
        }
      } else {
        const auto sv = variance_slots(a, b, out_pol);
        for (const auto& block : pat) {
          blockvars.clear();
          for (int s : block) blockvars.push_back(sv[s]);
          prod *= cc.block_cumulant(blockvars);
          if (prod == 0.0) break;
        }
      }
      total += prod;
    }
  }
  return total;
}

bool pattern_channel_ok(const Pattern& pat, const int* slot_chan) {
  for (const auto& block : pat) {
    const int c0 = slot_chan[block[0]];
    for (int s : block)
      if (slot_chan[s] != c0) return false;
  }
  return true;
}

// full variance + rotation assembly for one output polarization, normalized
// moment units; returns bucket sums with the phase-rotation correction folded
std::array<double, 3> assemble_pol(KernelEngine& eng, const MomentProvider& mp, int out_pol,
                                   double e_out_norm, const NliSelection& sel) {
  const int nch = eng.wdm().num_channels;
  auto classes = enumerate_classes(nch);

  // selection filter
  std::vector<TripletClass> act;
  for (const auto& c : classes) {
    const auto sup = class_support(c);
    switch (sel.mode) {
      case NliSelection::Mode::all:
        act.push_back(c);
        break;
      case NliSelection::Mode::coi_only:
        if (sup.chans.empty()) act.push_back(c);
        break;
      case NliSelection::Mode::xci_share: {
        bool ok = true;
        for (int ch : sup.chans)
          if (ch != sel.offset) ok = false;
        if (ok) act.push_back(c);
        break;
      }
    }
  }

  CumulantCache cc{&mp, {}};
  const auto& vpats = variance_patterns();
  const auto& rpats = rotation_patterns();

  // enumerate contributing terms first so kernel integrals can be prefetched
  struct Term {
    int i, j, pid;
    cplx mom;
  };
  std::vector<Term> terms;
  for (size_t i = 0; i < act.size(); ++i) {
    for (size_t j = i; j < act.size(); ++j) {
      if (sel.mode == NliSelection::Mode::xci_share &&
          (!class_touches(act[i], sel.offset) || !class_touches(act[j], sel.offset)))
        continue;
      int slot_chan[6] = {act[i].c[0], act[i].c[1], act[i].c[2],
                          act[j].c[0], act[j].c[1], act[j].c[2]};
      for (size_t pid = 0; pid < vpats.size(); ++pid) {
        if (!pattern_channel_ok(vpats[pid], slot_chan)) continue;
        const cplx mom = pattern_moment(cc, vpats[pid], false, out_pol);
        if (std::abs(mom) < 1e-13) continue;
        terms.push_back({static_cast<int>(i), static_cast<int>(j), static_cast<int>(pid), mom});
      }
    }
  }

#pragma omp parallel for schedule(dynamic)
  for (size_t t = 0; t < terms.size(); ++t)
    eng.pattern_integral(act[terms[t].i], act[terms[t].j], terms[t].pid);

  std::array<double, 3> acc{0, 0, 0};
  for (const auto& t : terms) {
    const cplx j = eng.pattern_integral(act[t.i], act[t.j], t.pid);
    const cplx v = t.mom * j;
    const int bucket = pair_support(act[t.i], act[t.j]).bucket();
    acc[bucket] += (t.i == t.j) ? v.real() : 2 * v.real();  // Hermitian pair (j,i)
  }

  // rotation terms: c = j gamma s^2 sum(M); the per-run constant phase
  // compensation removes (Im c)^2 / E|a_out|^2 of measured noise power
  std::map<std::set<int>, double> rot;
  for (const auto& c : act) {
    if (sel.mode == NliSelection::Mode::xci_share && !class_touches(c, sel.offset)) continue;
    int slot_chan[4] = {c.c[0], c.c[1], c.c[2], 0};  // ext slot is COI
    for (size_t pid = 0; pid < rpats.size(); ++pid) {
      if (!pattern_channel_ok(rpats[pid], slot_chan)) continue;
      const cplx mom = pattern_moment(cc, rpats[pid], true, out_pol);
      if (std::abs(mom) < 1e-13) continue;
      const cplx j = eng.rotation_integral(c, static_cast<int>(pid));
      rot[class_support(c).chans] += (mom * j).real();
    }
  }
  for (const auto& [sa, ca] : rot) {
    for (const auto& [sb, cb] : rot) {
      SupportSig u;
      u.chans = sa;
      u.chans.insert(sb.begin(), sb.end());
      acc[u.bucket()] -= ca * cb / e_out_norm;
    }
  }
  return acc;
}

NliBreakdown assemble(const Constellation& c, const LinkConfig& link, const WdmConfig& wdm,
                      const NliQuadOptions& opts, const NliSelection& sel, bool egn_path) {
  c.validate(true);
  if (c.dims != 4)
    throw std::invalid_argument("nli model expects a 4D constellation (wrap 2D formats as PM)");
  const ModulationMoments mm = moments(c);
  {
    Eigen::VectorXd mu = c.mean();
    if (mu.cwiseAbs().maxCoeff() > 1e-9 * std::sqrt(std::max(c.energy(), 1e-300)))
      throw std::invalid_argument("nli model requires a zero-mean constellation");
  }

  auto engine = shared_engine(link, wdm, opts);

  ConstellationMoments base(c);
  FactorizedMoments fact(base);
  const MomentProvider& real_mp = egn_path ? static_cast<const MomentProvider&>(fact)
                                           : static_cast<const MomentProvider&>(base);
  GaussianMoments gauss(mm.e2x, mm.e2y);

  const double t = wdm.symbol_period_s();
  const double etot = mm.e2x + mm.e2y;
  const double g = link.gamma_per_w_m() * 8.0 / 9.0;
  // physical amplitude scale s = P T / etot enters as s^3 in every term and
  // cancels the T P^3 of the eta definition: eta = gamma~^2 T^2 X / etot^3
  const double unit = g * g * t * t / (etot * etot * etot);

  NliBreakdown out;
  for (int pol = 0; pol < 2; ++pol) {
    const double e_out = pol == 0 ? mm.e2x : mm.e2y;
    const auto real_acc = assemble_pol(*engine, real_mp, pol, e_out, sel);
    const auto gn_acc = assemble_pol(*engine, gauss, pol, e_out, sel);
    NliComponent* comps[3] = {pol == 0 ? &out.sci_x : &out.sci_y,
                              pol == 0 ? &out.xci_x : &out.xci_y,
                              pol == 0 ? &out.mci_x : &out.mci_y};
    double eta_pol = 0;
    for (int bkt = 0; bkt < 3; ++bkt) {
      comps[bkt]->mod_indep = unit * gn_acc[bkt];
      comps[bkt]->mod_dep = unit * (real_acc[bkt] - gn_acc[bkt]);
      eta_pol += unit * real_acc[bkt];
    }
    (pol == 0 ? out.eta_x : out.eta_y) = eta_pol;
  }
  return out;
}

}  // namespace

NliBreakdown eta_total(const Constellation& c, const LinkConfig& link, const WdmConfig& wdm,
                       const NliQuadOptions& opts, const NliSelection& sel) {
  return assemble(c, link, wdm, opts, sel, false);
}

NliBreakdown eta_total_egn(const Constellation& c, const LinkConfig& link, const WdmConfig& wdm,
                           const NliQuadOptions& opts, const NliSelection& sel) {
  return assemble(c, link, wdm, opts, sel, true);
}

NliBreakdown eta_gn_gaussian(const LinkConfig& link, const WdmConfig& wdm,
                             const NliQuadOptions& opts) {
  // circular-Gaussian input with equal per-polarization powers
  auto engine = shared_engine(link, wdm, opts);
  GaussianMoments gauss(1.0, 1.0);
  const double t = wdm.symbol_period_s();
  const double g = link.gamma_per_w_m() * 8.0 / 9.0;
  const double unit = g * g * t * t / 8.0;  // etot = 2

  NliBreakdown out;
  for (int pol = 0; pol < 2; ++pol) {
    const auto acc = assemble_pol(*engine, gauss, pol, 1.0, NliSelection{});
    NliComponent* comps[3] = {pol == 0 ? &out.sci_x : &out.sci_y,
                              pol == 0 ? &out.xci_x : &out.xci_y,
                              pol == 0 ? &out.mci_x : &out.mci_y};
    double eta_pol = 0;
    for (int bkt = 0; bkt < 3; ++bkt) {
      comps[bkt]->mod_indep = unit * acc[bkt];
      eta_pol += unit * acc[bkt];
    }
    (pol == 0 ? out.eta_x : out.eta_y) = eta_pol;
  }
  return out;
}

XpmIntegrals link_integrals(const LinkConfig& link, const WdmConfig& wdm, int channel_offset,
                            const NliQuadOptions& opts) {
  if (channel_offset == 0) throw std::invalid_argument("channel_offset must be nonzero");
  const int h = (wdm.num_channels - 1) / 2;
  if (std::abs(channel_offset) > h)
    throw std::invalid_argument("channel_offset outside the WDM grid");
  auto engine = shared_engine(link, wdm, opts);

  const TripletClass x1{{channel_offset, channel_offset, 0}};
  const auto& vpats = variance_patterns();
  const auto& rpats = rotation_patterns();

  // locate the three X1 x X1 kernel sums by their block structure
  // D: {0,3}{1,4}{2,5}; B: {0,1}{3,4}{2,5}; K4: {0,1,3,4}{2,5}
  auto find_pattern = [&](const Pattern& want) {
    for (size_t i = 0; i < vpats.size(); ++i) {
      Pattern a = vpats[i], b = want;
      for (auto& blk : a) std::sort(blk.begin(), blk.end());
      for (auto& blk : b) std::sort(blk.begin(), blk.end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a == b) return static_cast<int>(i);
    }
    throw std::logic_error("pattern not found");
  };
  const int pd = find_pattern({{0, 3}, {1, 4}, {2, 5}});
  const int pb = find_pattern({{0, 1}, {3, 4}, {2, 5}});
  const int pk = find_pattern({{0, 1, 3, 4}, {2, 5}});

  const double jd = engine->pattern_integral(x1, x1, pd).real();
  const double jb = engine->pattern_integral(x1, x1, pb).real();
  const double jk = engine->pattern_integral(x1, x1, pk).real();

  // rotation kernel: {0,1} paired, {2,ext}: sum_t S_tt0 (real, = Ns Leff / T)
  auto find_rot = [&](const Pattern& want) {
    for (size_t i = 0; i < rpats.size(); ++i) {
      Pattern a = rpats[i], b = want;
      for (auto& blk : a) std::sort(blk.begin(), blk.end());
      for (auto& blk : b) std::sort(blk.begin(), blk.end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a == b) return static_cast<int>(i);
    }
    throw std::logic_error("rotation pattern not found");
  };
  const double gr = engine->rotation_integral(x1, find_rot({{0, 1}, {2, 3}})).real();

  const double g = link.gamma_per_w_m() * 8.0 / 9.0;
  XpmIntegrals mu;
  mu.mu1 = g * g * jd / 2.0;
  mu.mu2 = g * g * jk;
  mu.mu3 = g * g * (gr * gr - jb) / 2.0;
  return mu;
}

double xpm_term(const ModulationMoments& m, const XpmIntegrals& mu, double phi) {
  if (m.e2x <= 0) throw std::invalid_argument("moments must carry positive x-pol power");
  const double e2x = m.e2x, e2y = m.e2y;
  const double exy2 = std::norm(m.exy);
  const double k4 = (m.e4x - 2 * e2x * e2x) + (m.e4y - 2 * e2y * e2y) +
                    2 * (m.exxyy - e2x * e2y - exy2);
  const double phi1 = 2 * (e2y * e2y - e2x * e2x + 2 * exy2) / (e2x * e2x);
  const double phi2 = k4 / (e2x * e2x);
  const double phi3 = -2 * ((e2x + e2y) * (e2x + e2y) - 4 * e2x * e2x) / (e2x * e2x);
  return (4 * mu.mu1 - 8 * mu.mu3) * phi + (phi1 * mu.mu1 + phi2 * mu.mu2 + phi3 * mu.mu3) * phi;
}

double effective_snr_db(const NliBreakdown& eta, const LinkConfig& link, const WdmConfig& wdm,
                        double p_dbm) {
  if (!std::isfinite(p_dbm)) throw std::invalid_argument("bad launch power");
  const double p = 1e-3 * std::pow(10.0, p_dbm / 10.0);
  if (p <= 0) throw std::invalid_argument("launch power must be positive");
  const double ase = ase_power_total(link, wdm.symbol_rate_hz);
  const double nli = eta.eta_total() * p * p * p;
  return 10 * std::log10(p / (ase + nli));
}

double effective_snr_db(const Constellation& c, const LinkConfig& link, const WdmConfig& wdm,
                        double p_dbm, const NliQuadOptions& opts) {
  return effective_snr_db(eta_total(c, link, wdm, opts), link, wdm, p_dbm);
}

LaunchOptimum optimal_launch_power(const NliBreakdown& eta, const LinkConfig& link,
                                   const WdmConfig& wdm) {
  const double et = eta.eta_total();
  if (et <= 0) throw std::invalid_argument("eta must be positive");
  const double ase = ase_power_total(link, wdm.symbol_rate_hz);
  const double p_opt = std::cbrt(ase / (2 * et));
  LaunchOptimum o;
  o.p_opt_dbm = 10 * std::log10(p_opt / 1e-3);
  o.snr_eff_db = 10 * std::log10(p_opt / (1.5 * ase));
  return o;
}

LaunchOptimum optimal_launch_power(const Constellation& c, const LinkConfig& link,
                                   const WdmConfig& wdm, const NliQuadOptions& opts) {
  return optimal_launch_power(eta_total(c, link, wdm, opts), link, wdm);
}

void clear_nli_kernel_cache() { nli_detail::clear_engines(); }

}  // namespace mdshape
