#pragma once

// Internal machinery of the NLI model: first-order regular-perturbation
// kernel integrals and the moment/cumulant engine that assembles them into
// NLI variances for arbitrary zero-mean 4D inputs.
//
// The received COI symbol perturbation is
//   da_x = j gamma~ sum_{classes} sum_{k,l,m} S_{klm} *
//            (a_p[k] conj(a_p[l]) a_x[m]),  p summed over {x,y},
// where a class is an ordered channel triplet (c1,c2,c3), c1-c2+c3 = 0, and
// S is the link kernel filtered by the pulses. E|da|^2 expands over set
// partitions of the six symbol slots; each partition contributes
// (joint cumulant product) x (kernel integral). Kernel integrals reduce via
// Poisson summation to at most 5-dimensional frequency integrals that this
// engine evaluates numerically with comb-aware panel quadrature (the
// phased-array factor of N_s coherent spans is periodic in the phase
// mismatch; panels are pinned to its peaks).

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "mdshape/constellation.hpp"
#include "mdshape/link.hpp"
#include "mdshape/nli.hpp"

namespace mdshape::nli_detail {

using cplx = std::complex<double>;

// ---------------------------------------------------------------- patterns

// Slot layout for variance integrals (unprimed triple, then primed):
//   0: a_p[k]   (+)   1: conj(a_p[l]) (-)   2: a_x[m]   (+)
//   3: conj(a_q[k'])(-) 4: a_q[l']  (+)     5: conj(a_x[m']) (-)
// Rotation integrals (E[conj(a_x[0]) da_x]) use slots 0,1,2 plus slot 3 as
// the external conjugated x symbol pinned at time 0.
using Pattern = std::vector<std::vector<int>>;

const std::vector<Pattern>& variance_patterns();  // partitions of 6, blocks >= 2
const std::vector<Pattern>& rotation_patterns();  // partitions of 4, blocks >= 2

// ------------------------------------------------------------- class pairs

struct TripletClass {
  std::array<int, 3> c{};  // channel indices, c[0] - c[1] + c[2] == 0
};

std::vector<TripletClass> enumerate_classes(int num_channels);

// ------------------------------------------------------------------ moments

struct SymbolVar {
  uint8_t pol;  // 0 = x, 1 = y
  bool conj;
};

class MomentProvider {
 public:
  virtual ~MomentProvider() = default;
  virtual cplx moment(std::span<const SymbolVar> vars) const = 0;
};

// Exact probability-weighted moments of a constellation (any zero-mean
// input; no symmetry assumptions).
class ConstellationMoments : public MomentProvider {
 public:
  explicit ConstellationMoments(const Constellation& c);
  cplx moment(std::span<const SymbolVar> vars) const override;

 private:
  std::vector<cplx> ax_, ay_;
  std::vector<double> p_;
  mutable std::map<uint64_t, cplx> cache_;
  mutable std::mutex mu_;
};

// Circular-Gaussian moments with per-polarization powers (Wick pairings).
class GaussianMoments : public MomentProvider {
 public:
  GaussianMoments(double e2x, double e2y) : e2_{e2x, e2y} {}
  cplx moment(std::span<const SymbolVar> vars) const override;

 private:
  double e2_[2];
};

// Independent-polarization view: joint moments replaced by products of the
// marginal per-polarization moments of `base`.
class FactorizedMoments : public MomentProvider {
 public:
  explicit FactorizedMoments(const MomentProvider& base) : base_(base) {}
  cplx moment(std::span<const SymbolVar> vars) const override;

 private:
  const MomentProvider& base_;
};

// Joint cumulant via the subset recursion kappa(S) = m(S) - sum over proper
// sub-partitions; vars.size() <= 6.
cplx joint_cumulant(const MomentProvider& mp, std::span<const SymbolVar> vars);

// --------------------------------------------------------------- kernels

struct Pulse {
  double T = 0;       // symbol period
  double roll = 0;
  double half_bw = 0; // (1 + roll) / (2T)
  double eval(double f) const;  // unit-energy RRC amplitude spectrum
};

class KernelEngine {
 public:
  KernelEngine(const LinkConfig& link, const WdmConfig& wdm, const NliQuadOptions& opts);

  // zeta(dbeta) * phased-array chi(dbeta)
  cplx link_kernel(double dbeta) const;

  // Kernel integral for an ordered class pair under a variance pattern.
  cplx pattern_integral(const TripletClass& cu, const TripletClass& cp, int pattern_id);
  // Kernel integral for the rotation term of a class.
  cplx rotation_integral(const TripletClass& cu, int pattern_id);

  const LinkConfig& link() const { return link_; }
  const WdmConfig& wdm() const { return wdm_; }

 private:
  struct Lin {  // linear form over the 6 frequency variables + constant
    std::array<double, 6> a{};
    double k = 0;
  };

  cplx evaluate(const std::vector<Lin>& deltas, const std::array<Lin, 6>& slot_freq,
                const std::array<double, 6>& slot_nu, const std::array<int, 6>& slot_sign,
                int nslots, int nblocks_summed) const;

  LinkConfig link_;
  WdmConfig wdm_;
  NliQuadOptions opts_;
  Pulse pulse_;
  double b_ = 0;      // 4 pi^2 beta2
  double alpha_ = 0;  // 1/m
  double ls_ = 0;
  int ns_ = 1;

  std::map<std::array<int64_t, 8>, cplx> cache_;
  std::mutex cache_mu_;
  double jscale_ = 0;  // largest |J| seen, convergence floor for tiny terms
};

// Shared engine per (link, wdm, opts); also serves the public cache-clear.
std::shared_ptr<KernelEngine> shared_engine(const LinkConfig& link, const WdmConfig& wdm,
                                            const NliQuadOptions& opts);
void clear_engines();

}  // namespace mdshape::nli_detail
