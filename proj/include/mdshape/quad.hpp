#pragma once

#include <functional>
#include <vector>

namespace mdshape {

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre_nodes(int n, std::vector<double>& x, std::vector<double>& w);

// Fixed-order Gauss-Legendre over [a, b].
double integrate_gl(const std::function<double(double)>& f, double a, double b, int order);

// Composite rule: the interval is cut at `breaks` (sorted, clipped to
// [a, b]) and each piece integrated with `order`-point Gauss-Legendre,
// further split so no panel exceeds `max_panel` in width.
double integrate_panels(const std::function<double(double)>& f, double a, double b,
                        const std::vector<double>& breaks, double max_panel, int order);

}  // namespace mdshape
