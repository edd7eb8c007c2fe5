#pragma once

#include <complex>
#include <memory>
#include <set>
#include <vector>

#include "mdshape/constellation.hpp"
#include "mdshape/link.hpp"

namespace mdshape {

struct NliQuadOptions {
  double rel_tol = 0.01;       // refinement-doubling stop on each integral
  int max_refine = 3;
  int outer_order = 16;        // Gauss-Legendre order per smooth dimension
  int panels_per_period = 6;   // inner resolution per phased-array period
};

struct NliComponent {
  double mod_indep = 0;        // Gaussian-moment (GN) share
  double mod_dep = 0;          // modulation-dependent correction
  double total() const { return mod_indep + mod_dep; }
};

// NLI power coefficients per polarization: sigma^2_NLI,p = eta_p * P^3 with P
// the total per-channel launch power. Components follow the channel support
// of each contribution: SCI = {COI}, XCI = {COI, one interferer}, MCI = rest.
struct NliBreakdown {
  double eta_x = 0, eta_y = 0;                 // 1/W^2
  NliComponent sci_x, xci_x, mci_x;
  NliComponent sci_y, xci_y, mci_y;
  double eta_total() const { return eta_x + eta_y; }
};

// Which interference contributions are evaluated: all channels, the channel
// of interest alone, or the COI plus a single interferer at `offset` with
// only the cross terms kept (the field-subtraction share an RP1 oracle
// measures when it toggles that channel).
struct NliSelection {
  enum class Mode { all, coi_only, xci_share };
  Mode mode = Mode::all;
  int offset = 1;
};

NliBreakdown eta_total(const Constellation& c, const LinkConfig& link, const WdmConfig& wdm,
                       const NliQuadOptions& opts = {}, const NliSelection& sel = {});

// Independent-polarization (EGN) path: identical link kernels, but all
// cross-polarization moments are replaced by products of the per-polarization
// marginal moments. Coincides with eta_total for PM-2D inputs.
NliBreakdown eta_total_egn(const Constellation& c, const LinkConfig& link, const WdmConfig& wdm,
                           const NliQuadOptions& opts = {}, const NliSelection& sel = {});

// XPM kernel integrals for the interferer at `channel_offset` (in units of
// the channel spacing), assembled so that the X1 power takes the form
//   sigma^2_X1,x = (4 mu1 - 8 mu3) Phi + [Phi1 mu1 + Phi2 mu2 + Phi3 mu3] Phi.
struct XpmIntegrals {
  double mu1 = 0, mu2 = 0, mu3 = 0;
};
XpmIntegrals link_integrals(const LinkConfig& link, const WdmConfig& wdm, int channel_offset,
                            const NliQuadOptions& opts = {});

// Closed-form X1 (XPM) power from the moment table, in the same units as
// Phi (moments are consumed in normalized units; Phi carries the power
// scaling E{|a_x|^2} E^2{|b_x|^2}).
//
// Coefficient table (moment monomial -> weight per integral):
//   mu1: +2 e2x^2            (Gaussian part, with mu3)
//        +2 (e2y^2 - e2x^2 + 2 |exy|^2)   -> Phi1
//   mu2: +k4 where k4 = E|bx|^4 - 2 e2x^2 + E|by|^4 - 2 e2y^2
//                     + 2 (E|bx|^2|by|^2 - e2x e2y - |exy|^2)  -> Phi2
//   mu3: -2 (e2x + e2y)^2    (Gaussian part -8 mu3; excess -> Phi3)
double xpm_term(const ModulationMoments& m, const XpmIntegrals& mu, double phi);

// Effective SNR from Eq. sigma-model: SNR = P / (sigma2_ASE + eta P^3), total
// signal power over total noise power across both polarizations.
double effective_snr_db(const NliBreakdown& eta, const LinkConfig& link, const WdmConfig& wdm,
                        double p_dbm);
double effective_snr_db(const Constellation& c, const LinkConfig& link, const WdmConfig& wdm,
                        double p_dbm, const NliQuadOptions& opts = {});

struct LaunchOptimum {
  double p_opt_dbm = 0;
  double snr_eff_db = 0;
};
// Closed form P_opt = (sigma2_ASE / (2 eta))^(1/3); at the optimum the NLI
// power equals sigma2_ASE / 2.
LaunchOptimum optimal_launch_power(const NliBreakdown& eta, const LinkConfig& link,
                                   const WdmConfig& wdm);
LaunchOptimum optimal_launch_power(const Constellation& c, const LinkConfig& link,
                                   const WdmConfig& wdm, const NliQuadOptions& opts = {});

// GN-model eta: circular-Gaussian moments at the same per-polarization power
// split as `c` (used for the Gaussian baseline and the GN-limit tests).
NliBreakdown eta_gn_gaussian(const LinkConfig& link, const WdmConfig& wdm,
                             const NliQuadOptions& opts = {});

void clear_nli_kernel_cache();

}  // namespace mdshape
