#include "mdshape/link.hpp"

namespace mdshape {

double ase_power(const LinkConfig& link, double bandwidth_hz) {
  link.validate();
  if (bandwidth_hz < 0) throw std::invalid_argument("negative bandwidth");
  const double g = link.span_gain_lin();
  const double nf_lin = std::pow(10.0, link.noise_figure_db / 10.0);
  return link.num_spans * (g - 1.0) * kPlanck * link.center_frequency_hz * (nf_lin / 2.0) *
         bandwidth_hz;
}

double ase_power_total(const LinkConfig& link, double bandwidth_hz) {
  return 2.0 * ase_power(link, bandwidth_hz);
}

}  // namespace mdshape
