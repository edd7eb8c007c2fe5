#pragma once

#include <cmath>
#include <stdexcept>

namespace mdshape {

constexpr double kPlanck = 6.62607015e-34;     // J s
constexpr double kLightSpeed = 299792458.0;    // m/s

// Identical-span lumped-amplified fiber link; amplifier gain exactly
// recovers the span loss.
struct LinkConfig {
  double span_length_km = 80;
  int num_spans = 10;
  double alpha_db_per_km = 0.2;
  double dispersion_ps_nm_km = 17;
  double gamma_per_w_km = 1.3;
  double noise_figure_db = 5;
  double center_frequency_hz = kLightSpeed / 1550e-9;

  double span_length_m() const { return span_length_km * 1e3; }
  // power attenuation coefficient, 1/m
  double alpha_lin() const { return alpha_db_per_km * std::log(10.0) / 10.0 / 1e3; }
  // beta2 = -D lambda^2 / (2 pi c), s^2/m
  double beta2() const {
    const double lambda = kLightSpeed / center_frequency_hz;
    return -dispersion_ps_nm_km * 1e-6 * lambda * lambda / (2 * M_PI * kLightSpeed);
  }
  double gamma_per_w_m() const { return gamma_per_w_km * 1e-3; }
  double effective_length_m() const {
    const double a = alpha_lin();
    return (1.0 - std::exp(-a * span_length_m())) / a;
  }
  double span_gain_lin() const { return std::exp(alpha_lin() * span_length_m()); }

  void validate() const {
    if (span_length_km <= 0 || num_spans < 1 || alpha_db_per_km <= 0 ||
        dispersion_ps_nm_km <= 0 || gamma_per_w_km <= 0 || center_frequency_hz <= 0)
      throw std::invalid_argument("link parameters must be positive, num_spans >= 1");
  }
};

struct WdmConfig {
  int num_channels = 11;          // odd, channel of interest at center
  double symbol_rate_hz = 45e9;
  double channel_spacing_hz = 50e9;
  double rolloff = 0.1;           // RRC
  double launch_power_dbm = 0;    // per channel

  double launch_power_w() const { return 1e-3 * std::pow(10.0, launch_power_dbm / 10.0); }
  double symbol_period_s() const { return 1.0 / symbol_rate_hz; }
  double occupied_bandwidth_hz() const {
    return (num_channels - 1) * channel_spacing_hz + symbol_rate_hz * (1 + rolloff);
  }

  void validate() const {
    if (num_channels < 1 || num_channels % 2 == 0)
      throw std::invalid_argument("num_channels must be odd (channel of interest at center)");
    if (symbol_rate_hz <= 0 || channel_spacing_hz <= 0 || rolloff < 0 || rolloff > 1)
      throw std::invalid_argument("bad WDM parameters");
    if (channel_spacing_hz < symbol_rate_hz * (1 + rolloff) - 1e-6 * symbol_rate_hz)
      throw std::invalid_argument("channel spacing below (1+rolloff) * symbol rate");
  }
};

// Per-polarization ASE power over `bandwidth`:
//   sigma^2 = N_s (G - 1) h nu (10^(NF/10) / 2) B
double ase_power(const LinkConfig& link, double bandwidth_hz);
// Both polarizations (doubles the per-polarization value).
double ase_power_total(const LinkConfig& link, double bandwidth_hz);

}  // namespace mdshape
