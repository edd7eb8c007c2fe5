#pragma once

#include "mdshape/constellation.hpp"

namespace mdshape {

// Built-in generators. All returned constellations are normalized to unit
// energy per polarization (2D formats to unit total energy) and zero mean.

// Square QAM (M = 4, 16, 64, 256) with per-axis reflected Gray labels.
Constellation make_square_qam(int m_points);
// Cross QAM (M = 32, 128) with a quasi-Gray labeling.
Constellation make_cross_qam(int m_points);
// 8QAM variants used in the literature; `star` is the two-ring layout with
// outer radius (1+sqrt(3)) relative to the inner QPSK ring.
enum class EightQamVariant { star, rect, circ };
Constellation make_8qam(EightQamVariant v);

Constellation make_qpsk();
Constellation make_bpsk();  // 1D format housed as 2D with zero Q

// Polarization-multiplexed product: labels concatenate (x first), probs
// multiply, energy normalized per polarization.
Constellation pm_product(const Constellation& c2d);

// Parity subset of PM-QPSK: 8 of 16 points with even sign parity (doubled
// minimum distance, jointly-modulated polarizations).
Constellation make_so_pm_qpsk();

// Polarization-ring-switched 4D format: 8PSK phases on each polarization,
// two ring radii with ratio `rho` swapped between polarizations by the
// parity of the phase indices, `delta` extra phase rotation on the outer
// ring. 64 points, Gray phase labels, 4D constant modulus.
Constellation make_prs64(double rho, double delta);

// Name-based lookup over the built-in set: pm-qpsk, pm-8qam, pm-16qam,
// pm-32qam, pm-64qam, qpsk, 8qam, 16qam, 32qam, 64qam, bpsk, so-pm-qpsk.
// Throws std::invalid_argument with the available list on unknown names.
Constellation make_format(const std::string& name);
std::vector<std::string> builtin_format_names();

}  // namespace mdshape
