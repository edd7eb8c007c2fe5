#include "mdshape/nli.hpp"
#include "src/nli_internal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mdshape/quad.hpp"

namespace mdshape::nli_detail {

namespace {

// set partitions of {0..n-1} with every block of size >= 2 (zero-mean
// symbols kill singleton blocks)
void gen_partitions(int n, std::vector<Pattern>& out) {
  std::vector<std::vector<int>> blocks;
  std::function<void(int)> rec = [&](int next) {
    if (next == n) {
      for (const auto& b : blocks)
        if (b.size() < 2) return;
      out.push_back(blocks);
      return;
    }
    for (auto& b : blocks) {
      b.push_back(next);
      rec(next + 1);
      b.pop_back();
    }
    blocks.push_back({next});
    rec(next + 1);
    blocks.pop_back();
  };
  rec(0);
}

}  // namespace

const std::vector<Pattern>& variance_patterns() {
  static const std::vector<Pattern> pats = [] {
    std::vector<Pattern> p;
    gen_partitions(6, p);
    return p;
  }();
  return pats;
}

const std::vector<Pattern>& rotation_patterns() {
  static const std::vector<Pattern> pats = [] {
    std::vector<Pattern> p;
    gen_partitions(4, p);
    return p;
  }();
  return pats;
}

std::vector<TripletClass> enumerate_classes(int num_channels) {
  const int h = (num_channels - 1) / 2;
  std::vector<TripletClass> out;
  for (int c1 = -h; c1 <= h; ++c1)
    for (int c3 = -h; c3 <= h; ++c3) {
      const int c2 = c1 + c3;  // c1 - c2 + c3 = 0
      if (c2 < -h || c2 > h) continue;
      out.push_back({{c1, c2, c3}});
    }
  return out;
}

// ------------------------------------------------------------------ pulse

double Pulse::eval(double f) const {
  const double af = std::abs(f);
  if (af >= half_bw) return 0;
  const double f1 = (1 - roll) / (2 * T);
  if (af <= f1) return std::sqrt(T);
  const double x = M_PI * T / roll * (af - f1);
  return std::sqrt(T * 0.5 * (1 + std::cos(x)));
}

// ------------------------------------------------------------ linear forms

namespace {

struct LinForm {
  std::array<double, 6> a{};
  double k = 0;

  double eval(const double* v) const {
    double s = k;
    for (int i = 0; i < 6; ++i) s += a[i] * v[i];
    return s;
  }
  bool depends(int v) const { return a[v] != 0; }
};

LinForm var_form(int v) {
  LinForm l;
  l.a[v] = 1;
  return l;
}

LinForm axpy(const LinForm& x, double c, const LinForm& y) {  // x + c*y
  LinForm r = x;
  for (int i = 0; i < 6; ++i) r.a[i] += c * y.a[i];
  r.k += c * y.k;
  return r;
}

struct Factor {
  enum class Kind { pulse, kernel_u, kernel_p } kind;
  LinForm arg;   // pulse argument
  LinForm a, b;  // kernel mismatch: dbeta = bcoef * a * b

  bool depends(int v) const {
    return kind == Kind::pulse ? arg.depends(v) : (a.depends(v) || b.depends(v));
  }
};

struct NestProblem {
  std::vector<int> vars;  // integration order, outermost first
  std::vector<const Factor*> facs;
};

// Refinement doubling until successive levels agree to rel_tol. `scale_hint`
// is the magnitude of the dominant integral already computed on the same
// geometry; values negligible against it need not converge on their own.
template <class F>
cplx refine_convergent(const NliQuadOptions& base, double scale_hint, F&& eval_at) {
  cplx last{};
  bool have_last = false;
  for (int level = 0; level <= base.max_refine; ++level) {
    NliQuadOptions o = base;
    o.outer_order = base.outer_order << level;
    o.panels_per_period = base.panels_per_period << level;
    const cplx j = eval_at(o);
    if (have_last) {
      const double diff = std::abs(j - last);
      const double scale = std::max(std::abs(j), std::abs(last));
      if (diff <= base.rel_tol * scale + 1e-9 * base.rel_tol * scale_hint) return j;
      if (level == base.max_refine) {
        std::ostringstream msg;
        msg << "nli kernel integral did not converge within " << base.max_refine
            << " refinement doublings; estimate " << std::abs(j) << ", previous level "
            << std::abs(last) << ", bound " << diff;
        throw std::runtime_error(msg.str());
      }
    }
    last = j;
    have_last = true;
  }
  return last;
}

}  // namespace

// ----------------------------------------------------------------- engine

KernelEngine::KernelEngine(const LinkConfig& link, const WdmConfig& wdm,
                           const NliQuadOptions& opts)
    : link_(link), wdm_(wdm), opts_(opts) {
  link_.validate();
  wdm_.validate();
  pulse_.T = wdm.symbol_period_s();
  pulse_.roll = wdm.rolloff;
  pulse_.half_bw = (1 + wdm.rolloff) / (2 * pulse_.T);
  b_ = 4 * M_PI * M_PI * link.beta2();
  alpha_ = link.alpha_lin();
  ls_ = link.span_length_m();
  ns_ = link.num_spans;
}

cplx KernelEngine::link_kernel(double dbeta) const {
  const cplx zeta = (1.0 - std::exp(cplx(-alpha_ * ls_, dbeta * ls_))) / cplx(alpha_, -dbeta);
  const double th = dbeta * ls_;
  cplx chi;
  if (std::abs(std::sin(0.5 * th)) < 1e-12) {
    chi = static_cast<double>(ns_);
  } else {
    chi = (1.0 - std::exp(cplx(0, th * ns_))) / (1.0 - std::exp(cplx(0, th)));
  }
  return zeta * chi;
}

namespace {

struct Quadrature {
  const KernelEngine* eng;
  const Pulse* pulse;
  double bcoef, ls;
  int ns;
  int base_panels;  // plain panels per smooth variable
  int ppp;          // panels per phased-array period
  std::array<double, 6> lo{}, hi{};

  cplx factors_value(const std::vector<const Factor*>& facs, const double* vals) const {
    double amp = 1;
    for (const Factor* f : facs)
      if (f->kind == Factor::Kind::pulse) {
        amp *= pulse->eval(f->arg.eval(vals));
        if (amp == 0) return 0.0;
      }
    cplx kk = amp;
    for (const Factor* f : facs) {
      if (f->kind == Factor::Kind::pulse) continue;
      const double db = bcoef * f->a.eval(vals) * f->b.eval(vals);
      const cplx k = eng->link_kernel(db);
      kk *= (f->kind == Factor::Kind::kernel_u) ? k : std::conj(k);
    }
    return kk;
  }

  // Panel boundaries along v: phased-array peaks and mismatch zeros of every
  // kernel factor, plus graded shells on non-innermost levels so the
  // ridge-shaped inner results stay resolved.
  std::vector<double> plan_cuts(const std::vector<const Factor*>& facs, int v,
                                const double* vals, bool innermost) const {
    const double a = lo[v], c = hi[v];
    std::vector<double> ridge, peaks;
    double comb_gap = std::numeric_limits<double>::infinity();

    for (const Factor* f : facs) {
      if (f->kind == Factor::Kind::pulse) continue;
      if (!f->a.depends(v) && !f->b.depends(v)) continue;
      double ra = f->a.k, rb = f->b.k;
      for (int u = 0; u < 6; ++u)
        if (u != v) {
          ra += f->a.a[u] * vals[u];
          rb += f->b.a[u] * vals[u];
        }
      // dbeta(v) = bcoef * (q2 v^2 + q1 v + q0)
      const double q2 = f->a.a[v] * f->b.a[v];
      const double q1 = f->a.a[v] * rb + f->b.a[v] * ra;
      const double q0 = ra * rb;

      auto roots_at = [&](double rhs, std::vector<double>& out) {
        if (q2 == 0) {
          if (q1 != 0) out.push_back((rhs - q0) / q1);
          return;
        }
        const double disc = q1 * q1 - 4 * q2 * (q0 - rhs);
        if (disc < 0) return;
        const double r = std::sqrt(disc);
        out.push_back((-q1 - r) / (2 * q2));
        out.push_back((-q1 + r) / (2 * q2));
      };
      roots_at(0.0, ridge);  // zeta Lorentzian center

      if (ns > 1) {
        auto db_at = [&](double x) { return bcoef * ((q2 * x + q1) * x + q0); };
        double dmin = std::min(db_at(a), db_at(c));
        double dmax = std::max(db_at(a), db_at(c));
        if (q2 != 0) {
          const double xe = -q1 / (2 * q2);
          if (xe > a && xe < c) {
            dmin = std::min(dmin, db_at(xe));
            dmax = std::max(dmax, db_at(xe));
          }
        }
        const double kscale = ls / (2 * M_PI);
        const long kmin = static_cast<long>(std::ceil(dmin * kscale));
        const long kmax = static_cast<long>(std::floor(dmax * kscale));
        if (kmax - kmin > 20000)
          throw std::runtime_error("nli kernel: phased-array comb too dense to integrate");
        std::vector<double> pk;
        for (long k = kmin; k <= kmax; ++k) roots_at((2 * M_PI * k / ls) / bcoef, pk);
        std::sort(pk.begin(), pk.end());
        for (double p : pk) {
          if (p <= a || p >= c) continue;
          peaks.push_back(p);
          // local comb period from the mismatch slope at the peak
          const double slope = std::abs(bcoef * (2 * q2 * p + q1));
          if (slope > 0) {
            const double period = 2 * M_PI / (ls * slope);
            comb_gap = std::min(comb_gap, period);
            peaks.push_back(p - 0.5 * period);
            peaks.push_back(p + 0.5 * period);
          }
        }
      }
    }

    std::vector<double> breaks = ridge;
    breaks.insert(breaks.end(), peaks.begin(), peaks.end());
    if (!innermost) {
      std::vector<double> shells;
      for (double z : ridge) {
        if (z <= a || z >= c) continue;
        for (double d = (c - a) / 512; d < (c - a) / 4; d *= 2) {
          shells.push_back(z - d);
          shells.push_back(z + d);
        }
      }
      breaks.insert(breaks.end(), shells.begin(), shells.end());
    }

    std::vector<double> cuts{a, c};
    for (double x : breaks)
      if (x > a && x < c) cuts.push_back(x);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [&](double x, double y) { return std::abs(x - y) < 1e-9 * (c - a); }),
               cuts.end());

    const double plain = (c - a) / base_panels;
    const double fine =
        std::isfinite(comb_gap) ? std::max(comb_gap / std::max(1, ppp), 1e-12 * (c - a)) : plain;
    std::vector<double> out;
    out.push_back(cuts.front());
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double x0 = cuts[i], x1 = cuts[i + 1];
      const double gap = x1 - x0;
      const double target = (gap < 2.5 * comb_gap) ? fine : plain;
      const int nsub = std::max(1, static_cast<int>(std::ceil(gap / target)));
      for (int s = 1; s <= nsub; ++s) out.push_back(x0 + gap * s / nsub);
    }
    return out;
  }

  cplx integrate(const NestProblem& nest, size_t depth, double* vals) const {
    const int v = nest.vars[depth];
    const bool innermost = depth + 1 == nest.vars.size();
    const auto cuts = plan_cuts(nest.facs, v, vals, innermost);

    static thread_local std::vector<double> gx, gw;
    gauss_legendre_nodes(7, gx, gw);

    cplx total = 0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
      const double half = 0.5 * (cuts[i + 1] - cuts[i]);
      if (half <= 0) continue;
      for (int q = 0; q < 7; ++q) {
        vals[v] = mid + half * gx[q];
        const cplx inner =
            innermost ? factors_value(nest.facs, vals) : integrate(nest, depth + 1, vals);
        total += (gw[q] * half) * inner;
      }
    }
    vals[v] = 0;
    return total;
  }
};

// order nest variables: smooth ones outermost, fastest comb innermost
void order_nest(const Quadrature& qd, NestProblem& nest) {
  std::array<double, 6> center{};
  for (int v : nest.vars) center[v] = 0.5 * (qd.lo[v] + qd.hi[v]);
  auto rate = [&](int v) {
    double r = 0;
    for (const Factor* f : nest.facs) {
      if (f->kind == Factor::Kind::pulse) continue;
      if (!f->a.depends(v) && !f->b.depends(v)) continue;
      r += std::abs(qd.bcoef) *
           (std::abs(f->a.a[v] * f->b.eval(center.data())) +
            std::abs(f->b.a[v] * f->a.eval(center.data()))) *
           (qd.hi[v] - qd.lo[v]) * qd.ls / (2 * M_PI);
    }
    return r;
  };
  std::stable_sort(nest.vars.begin(), nest.vars.end(),
                   [&](int x, int y) { return rate(x) < rate(y); });
}

}  // namespace

cplx KernelEngine::evaluate(const std::vector<Lin>& deltas_in,
                            const std::array<Lin, 6>& slot_lin_in,
                            const std::array<double, 6>& slot_nu,
                            const std::array<int, 6>& slot_sign, int nslots,
                            int nblocks_summed) const {
  (void)slot_sign;
  const bool primed = nslots == 6;
  const int nvars = primed ? 6 : 3;

  auto to_form = [](const Lin& l) {
    LinForm f;
    f.a = l.a;
    f.k = l.k;
    return f;
  };

  // ---- eliminate the delta constraints
  std::array<bool, 6> pivoted{};
  std::array<LinForm, 6> expr;
  for (int v = 0; v < 6; ++v) expr[v] = var_form(v);
  const int pref[6] = {3, 4, 5, 0, 2, 1};
  const double fscale =
      pulse_.half_bw + wdm_.channel_spacing_hz * ((wdm_.num_channels - 1) / 2 + 1.0);

  for (const Lin& row_in : deltas_in) {
    LinForm row = to_form(row_in);
    for (int v = 0; v < 6; ++v) {
      if (pivoted[v] && row.a[v] != 0) {
        const double c = row.a[v];
        row.a[v] = 0;
        row = axpy(row, c, expr[v]);
      }
    }
    int piv = -1;
    for (int pi = 0; pi < 6; ++pi) {
      const int v = pref[pi];
      if (v >= nvars || pivoted[v]) continue;
      if (std::abs(row.a[v]) > 1e-9) {
        piv = v;
        break;
      }
    }
    if (piv < 0) {
      if (std::abs(row.k) > 1e-6 * fscale) return 0.0;  // constraints admit no overlap
      continue;
    }
    const double c = row.a[piv];
    row.a[piv] = 0;
    const LinForm sub = axpy(LinForm{}, -1.0 / c, row);
    pivoted[piv] = true;
    expr[piv] = sub;
    for (int v = 0; v < 6; ++v) {
      if (!pivoted[v] || v == piv) continue;
      const double cv = expr[v].a[piv];
      if (cv != 0) {
        expr[v].a[piv] = 0;
        expr[v] = axpy(expr[v], cv, sub);
      }
    }
  }

  auto closed = [&](const LinForm& f) {
    LinForm r;
    r.k = f.k;
    for (int v = 0; v < 6; ++v) {
      if (f.a[v] == 0) continue;
      if (pivoted[v])
        r = axpy(r, f.a[v], expr[v]);
      else
        r.a[v] += f.a[v];
    }
    return r;
  };

  // ---- build factors closed over the free variables
  std::array<LinForm, 6> slot_lin;
  for (int s = 0; s < nslots; ++s) slot_lin[s] = to_form(slot_lin_in[s]);

  std::vector<Factor> factors;
  std::vector<int> fac_side;  // 1 = unprimed triple, 2 = primed triple
  {
    Factor mf;
    mf.kind = Factor::Kind::pulse;
    mf.arg = closed(var_form(0));
    factors.push_back(mf);
    fac_side.push_back(1);
    if (primed) {
      Factor mg;
      mg.kind = Factor::Kind::pulse;
      mg.arg = closed(var_form(3));
      factors.push_back(mg);
      fac_side.push_back(2);
    }
    for (int s = 0; s < nslots; ++s) {
      Factor pf;
      pf.kind = Factor::Kind::pulse;
      pf.arg = closed(slot_lin[s]);
      pf.arg.k -= slot_nu[s];
      factors.push_back(pf);
      fac_side.push_back(s < 3 ? 1 : 2);
    }
    Factor ku;
    ku.kind = Factor::Kind::kernel_u;
    ku.a = closed(axpy(var_form(1), -1.0, var_form(0)));  // f1 - f
    ku.b = closed(axpy(var_form(1), -1.0, var_form(2)));  // f1 - f2
    factors.push_back(ku);
    fac_side.push_back(1);
    if (primed) {
      Factor kp;
      kp.kind = Factor::Kind::kernel_p;
      kp.a = closed(axpy(var_form(4), -1.0, var_form(3)));
      kp.b = closed(axpy(var_form(4), -1.0, var_form(5)));
      factors.push_back(kp);
      fac_side.push_back(2);
    }
  }

  std::vector<int> free_vars;
  for (int v = 0; v < nvars; ++v)
    if (!pivoted[v]) free_vars.push_back(v);

  Quadrature qd;
  qd.eng = this;
  qd.pulse = &pulse_;
  qd.bcoef = b_;
  qd.ls = ls_;
  qd.ns = ns_;
  qd.base_panels = std::max(2, opts_.outer_order / 8);
  qd.ppp = std::max(opts_.panels_per_period,
                    static_cast<int>(opts_.panels_per_period * std::min(6.0, ns_ / 6.0)));
  auto var_center = [&](int v) -> double {
    switch (v) {
      case 0: return 0;
      case 1: return slot_nu[0];
      case 2: return slot_nu[1];
      case 3: return 0;
      case 4: return slot_nu[3];
      default: return slot_nu[4];
    }
  };
  for (int v : free_vars) {
    qd.lo[v] = var_center(v) - pulse_.half_bw;
    qd.hi[v] = var_center(v) + pulse_.half_bw;
  }

  const double tnorm = std::pow(pulse_.T, -nblocks_summed);
  std::array<double, 6> vals{};

  if (free_vars.empty()) {
    std::vector<const Factor*> all;
    for (const auto& f : factors) all.push_back(&f);
    return qd.factors_value(all, vals.data()) * tnorm;
  }

  // ---- split into independent unprimed/primed nests when possible
  std::array<int, 6> var_side{};
  for (size_t i = 0; i < factors.size(); ++i)
    for (int v : free_vars)
      if (factors[i].depends(v)) var_side[v] |= fac_side[i];

  std::vector<int> shared_vars, u_vars, p_vars;
  for (int v : free_vars) {
    if (var_side[v] == 1) u_vars.push_back(v);
    else if (var_side[v] == 2) p_vars.push_back(v);
    else shared_vars.push_back(v);
  }

  std::vector<const Factor*> shared_facs, u_facs, p_facs;
  bool split_ok = true;
  for (const auto& f : factors) {
    auto dep_on = [&](const std::vector<int>& vs) {
      for (int v : vs)
        if (f.depends(v)) return true;
      return false;
    };
    const bool u_dep = dep_on(u_vars), p_dep = dep_on(p_vars);
    if (u_dep && p_dep) {
      split_ok = false;
      break;
    }
    if (u_dep) u_facs.push_back(&f);
    else if (p_dep) p_facs.push_back(&f);
    else shared_facs.push_back(&f);
  }
  if (!split_ok) {
    shared_vars = free_vars;
    u_vars.clear();
    p_vars.clear();
    shared_facs.clear();
    u_facs.clear();
    p_facs.clear();
    for (const auto& f : factors) shared_facs.push_back(&f);
  }

  NestProblem u_nest{u_vars, u_facs}, p_nest{p_vars, p_facs};
  order_nest(qd, u_nest);
  order_nest(qd, p_nest);

  // shared recursion: the shared level sees every factor when planning its
  // panels (inner nest values ride on the same ridges)
  std::vector<const Factor*> all_facs;
  for (const auto& f : factors) all_facs.push_back(&f);

  std::function<cplx(size_t)> shared_rec = [&](size_t depth) -> cplx {
    if (depth == shared_vars.size()) {
      cplx val = qd.factors_value(shared_facs, vals.data());
      if (val == 0.0) return 0.0;
      if (!u_nest.vars.empty()) val *= qd.integrate(u_nest, 0, vals.data());
      else if (!u_nest.facs.empty()) val *= qd.factors_value(u_nest.facs, vals.data());
      if (val == 0.0) return 0.0;
      if (!p_nest.vars.empty()) val *= qd.integrate(p_nest, 0, vals.data());
      else if (!p_nest.facs.empty()) val *= qd.factors_value(p_nest.facs, vals.data());
      return val;
    }
    const int v = shared_vars[depth];
    const auto cuts = qd.plan_cuts(all_facs, v, vals.data(), false);
    static thread_local std::vector<double> gx, gw;
    gauss_legendre_nodes(7, gx, gw);
    cplx total = 0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
      const double half = 0.5 * (cuts[i + 1] - cuts[i]);
      if (half <= 0) continue;
      for (int q = 0; q < 7; ++q) {
        vals[v] = mid + half * gx[q];
        total += (gw[q] * half) * shared_rec(depth + 1);
      }
    }
    vals[v] = 0;
    return total;
  };

  return shared_rec(0) * tnorm;
}

cplx KernelEngine::pattern_integral(const TripletClass& cu, const TripletClass& cp,
                                    int pattern_id) {
  const std::array<int64_t, 8> key{cu.c[0], cu.c[1], cu.c[2], cp.c[0],
                                   cp.c[1], cp.c[2], pattern_id, 0};
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }

  const Pattern& pat = variance_patterns()[pattern_id];
  const double df = wdm_.channel_spacing_hz;

  std::array<Lin, 6> slot_lin{};
  slot_lin[0].a[1] = 1;
  slot_lin[1].a[2] = 1;
  slot_lin[2].a[0] = 1;
  slot_lin[2].a[1] = -1;
  slot_lin[2].a[2] = 1;
  slot_lin[3].a[4] = 1;
  slot_lin[4].a[5] = 1;
  slot_lin[5].a[3] = 1;
  slot_lin[5].a[4] = -1;
  slot_lin[5].a[5] = 1;

  const std::array<double, 6> slot_nu{cu.c[0] * df, cu.c[1] * df, cu.c[2] * df,
                                      cp.c[0] * df, cp.c[1] * df, cp.c[2] * df};
  const std::array<int, 6> slot_sign{+1, -1, +1, -1, +1, -1};

  std::vector<Lin> deltas;
  for (const auto& block : pat) {
    Lin d{};
    for (int s : block) {
      for (int v = 0; v < 6; ++v) d.a[v] += slot_sign[s] * slot_lin[s].a[v];
      d.k -= slot_sign[s] * slot_nu[s];
    }
    deltas.push_back(d);
  }

  double hint;
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    hint = jscale_;
  }
  const cplx j = refine_convergent(opts_, hint, [&](const NliQuadOptions& o) {
    KernelEngine tmp(link_, wdm_, o);
    return tmp.evaluate(deltas, slot_lin, slot_nu, slot_sign, 6, static_cast<int>(pat.size()));
  });

  std::lock_guard<std::mutex> lock(cache_mu_);
  jscale_ = std::max(jscale_, std::abs(j));
  cache_.emplace(key, j);
  return j;
}

cplx KernelEngine::rotation_integral(const TripletClass& cu, int pattern_id) {
  const std::array<int64_t, 8> key{cu.c[0], cu.c[1], cu.c[2], 0, 0, 0, pattern_id, 1};
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }

  const Pattern& pat = rotation_patterns()[pattern_id];
  const double df = wdm_.channel_spacing_hz;

  std::array<Lin, 6> slot_lin{};
  slot_lin[0].a[1] = 1;
  slot_lin[1].a[2] = 1;
  slot_lin[2].a[0] = 1;
  slot_lin[2].a[1] = -1;
  slot_lin[2].a[2] = 1;

  const std::array<double, 6> slot_nu{cu.c[0] * df, cu.c[1] * df, cu.c[2] * df, 0, 0, 0};
  const std::array<int, 6> slot_sign{+1, -1, +1, 0, 0, 0};

  // slot 3 is the external pinned symbol: its block is not time-summed
  std::vector<Lin> deltas;
  int summed = 0;
  for (const auto& block : pat) {
    if (std::find(block.begin(), block.end(), 3) != block.end()) continue;
    Lin d{};
    for (int s : block) {
      for (int v = 0; v < 6; ++v) d.a[v] += slot_sign[s] * slot_lin[s].a[v];
      d.k -= slot_sign[s] * slot_nu[s];
    }
    deltas.push_back(d);
    ++summed;
  }

  double hint;
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    hint = jscale_;
  }
  const cplx j = refine_convergent(opts_, hint, [&](const NliQuadOptions& o) {
    KernelEngine tmp(link_, wdm_, o);
    return tmp.evaluate(deltas, slot_lin, slot_nu, slot_sign, 3, summed);
  });

  std::lock_guard<std::mutex> lock(cache_mu_);
  cache_.emplace(key, j);
  return j;
}

// --------------------------------------------------------- shared engines

namespace {
std::mutex g_engines_mu;
std::vector<std::pair<std::string, std::shared_ptr<KernelEngine>>> g_engines;

std::string engine_key(const LinkConfig& l, const WdmConfig& w, const NliQuadOptions& o) {
  std::ostringstream s;
  s.precision(17);
  s << l.span_length_km << ' ' << l.num_spans << ' ' << l.alpha_db_per_km << ' '
    << l.dispersion_ps_nm_km << ' ' << l.gamma_per_w_km << ' ' << l.center_frequency_hz << ' '
    << w.num_channels << ' ' << w.symbol_rate_hz << ' ' << w.channel_spacing_hz << ' '
    << w.rolloff << ' ' << o.rel_tol << ' ' << o.outer_order << ' ' << o.panels_per_period
    << ' ' << o.max_refine;
  return s.str();
}
}  // namespace

std::shared_ptr<KernelEngine> shared_engine(const LinkConfig& link, const WdmConfig& wdm,
                                            const NliQuadOptions& opts) {
  const std::string key = engine_key(link, wdm, opts);
  std::lock_guard<std::mutex> lock(g_engines_mu);
  for (auto& [k, e] : g_engines)
    if (k == key) return e;
  auto e = std::make_shared<KernelEngine>(link, wdm, opts);
  g_engines.emplace_back(key, e);
  return e;
}

void clear_engines() {
  std::lock_guard<std::mutex> lock(g_engines_mu);
  g_engines.clear();
}

}  // namespace mdshape::nli_detail
