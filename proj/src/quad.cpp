#include "mdshape/quad.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace mdshape {

void gauss_legendre_nodes(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("need at least one node");
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) {
      x = it->second.first;
      w = it->second.second;
      return;
    }
  }
  x.assign(n, 0);
  w.assign(n, 0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1, p2 = 0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(n, std::make_pair(x, w));
}

double integrate_gl(const std::function<double(double)>& f, double a, double b, int order) {
  std::vector<double> x, w;
  gauss_legendre_nodes(order, x, w);
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0;
  for (int i = 0; i < order; ++i) s += w[i] * f(c + h * x[i]);
  return s * h;
}

double integrate_panels(const std::function<double(double)>& f, double a, double b,
                        const std::vector<double>& breaks, double max_panel, int order) {
  if (b <= a) return 0;
  std::vector<double> cuts{a, b};
  for (double c : breaks)
    if (c > a && c < b) cuts.push_back(c);
  std::sort(cuts.begin(), cuts.end());
  double s = 0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    if (hi - lo <= 0) continue;
    const int nsub = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_panel)));
    const double h = (hi - lo) / nsub;
    for (int k = 0; k < nsub; ++k) s += integrate_gl(f, lo + k * h, lo + (k + 1) * h, order);
  }
  return s;
}

}  // namespace mdshape
