#include "mdshape/scenario.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mdshape {

namespace {

using nlohmann::json;

json to_json(const Scenario& s) {
  json j;
  j["id"] = s.id;
  j["description"] = s.description;
  j["link"] = {{"span_length_km", s.link.span_length_km},
               {"num_spans", s.link.num_spans},
               {"alpha_db_per_km", s.link.alpha_db_per_km},
               {"dispersion_ps_nm_km", s.link.dispersion_ps_nm_km},
               {"gamma_per_w_km", s.link.gamma_per_w_km},
               {"noise_figure_db", s.link.noise_figure_db},
               {"center_frequency_hz", s.link.center_frequency_hz}};
  j["wdm"] = {{"num_channels", s.wdm.num_channels},
              {"symbol_rate_hz", s.wdm.symbol_rate_hz},
              {"channel_spacing_hz", s.wdm.channel_spacing_hz},
              {"rolloff", s.wdm.rolloff},
              {"launch_power_dbm", s.wdm.launch_power_dbm}};
  j["sim"] = {{"symbols_per_run", s.sim.symbols_per_run},
              {"runs", s.sim.runs},
              {"seed", s.sim.seed},
              {"step_rule", s.sim.step_rule == SimConfig::StepRule::adaptive_phase
                                ? "adaptive_phase"
                                : "uniform"},
              {"max_nl_phase_per_step_rad", s.sim.max_nl_phase_per_step_rad},
              {"uniform_steps_per_span", s.sim.uniform_steps_per_span},
              {"oversampling_margin", s.sim.oversampling_margin}};
  return j;
}

Scenario from_json(const json& j) {
  Scenario s;
  s.id = j.at("id").get<std::string>();
  s.description = j.value("description", "");
  const auto& l = j.at("link");
  s.link.span_length_km = l.at("span_length_km");
  s.link.num_spans = l.at("num_spans");
  s.link.alpha_db_per_km = l.at("alpha_db_per_km");
  s.link.dispersion_ps_nm_km = l.at("dispersion_ps_nm_km");
  s.link.gamma_per_w_km = l.at("gamma_per_w_km");
  s.link.noise_figure_db = l.at("noise_figure_db");
  s.link.center_frequency_hz = l.value("center_frequency_hz", kLightSpeed / 1550e-9);
  const auto& w = j.at("wdm");
  s.wdm.num_channels = w.at("num_channels");
  s.wdm.symbol_rate_hz = w.at("symbol_rate_hz");
  s.wdm.channel_spacing_hz = w.at("channel_spacing_hz");
  s.wdm.rolloff = w.at("rolloff");
  s.wdm.launch_power_dbm = w.value("launch_power_dbm", 0.0);
  if (j.contains("sim")) {
    const auto& m = j.at("sim");
    s.sim.symbols_per_run = m.value("symbols_per_run", s.sim.symbols_per_run);
    s.sim.runs = m.value("runs", s.sim.runs);
    s.sim.seed = m.value("seed", s.sim.seed);
    const std::string rule = m.value("step_rule", "adaptive_phase");
    s.sim.step_rule = rule == "uniform" ? SimConfig::StepRule::uniform
                                        : SimConfig::StepRule::adaptive_phase;
    s.sim.max_nl_phase_per_step_rad =
        m.value("max_nl_phase_per_step_rad", s.sim.max_nl_phase_per_step_rad);
    s.sim.uniform_steps_per_span = m.value("uniform_steps_per_span", s.sim.uniform_steps_per_span);
    s.sim.oversampling_margin = m.value("oversampling_margin", s.sim.oversampling_margin);
  }
  s.link.validate();
  s.wdm.validate();
  return s;
}

// minimal SHA-1, enough for config digests
struct Sha1 {
  uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
  std::string digest(const std::string& msg) {
    std::string m = msg;
    const uint64_t bits = m.size() * 8ull;
    m.push_back('\x80');
    while (m.size() % 64 != 56) m.push_back('\0');
    for (int i = 7; i >= 0; --i) m.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    for (size_t off = 0; off < m.size(); off += 64) {
      uint32_t w[80];
      for (int i = 0; i < 16; ++i)
        w[i] = (static_cast<uint8_t>(m[off + 4 * i]) << 24) |
               (static_cast<uint8_t>(m[off + 4 * i + 1]) << 16) |
               (static_cast<uint8_t>(m[off + 4 * i + 2]) << 8) |
               static_cast<uint8_t>(m[off + 4 * i + 3]);
      auto rol = [](uint32_t x, int n) { return (x << n) | (x >> (32 - n)); };
      for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
      uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
      for (int i = 0; i < 80; ++i) {
        uint32_t f, k;
        if (i < 20) { f = (b & c) | (~b & d); k = 0x5A827999u; }
        else if (i < 40) { f = b ^ c ^ d; k = 0x6ED9EBA1u; }
        else if (i < 60) { f = (b & c) | (b & d) | (c & d); k = 0x8F1BBCDCu; }
        else { f = b ^ c ^ d; k = 0xCA62C1D6u; }
        const uint32_t t = rol(a, 5) + f + e + k + w[i];
        e = d; d = c; c = rol(b, 30); b = a; a = t;
      }
      h[0] += a; h[1] += b; h[2] += c; h[3] += d; h[4] += e;
    }
    char buf[48];
    std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x%08x", h[0], h[1], h[2], h[3], h[4]);
    return buf;
  }
};

}  // namespace

const std::vector<Scenario>& builtin_scenarios() {
  static const std::vector<Scenario> lib = [] {
    std::vector<Scenario> v;
    {
      Scenario s;
      s.id = "fig3";
      s.description = "10x80 km SMF, 11 channels, 45 GBaud on a 50 GHz grid";
      s.link = {80, 10, 0.2, 17, 1.3, 5, kLightSpeed / 1550e-9};
      s.wdm = {11, 45e9, 50e9, 0.1, 0};
      s.sim.symbols_per_run = 1 << 13;
      s.sim.runs = 2;
      v.push_back(s);
    }
    {
      Scenario s;
      s.id = "multispan";
      s.description = "60x80 km SMF, 11 channels, 96 GBaud on a 100 GHz grid";
      s.link = {80, 60, 0.2, 17, 1.3, 5, kLightSpeed / 1550e-9};
      s.wdm = {11, 96e9, 100e9, 0.04, 0};
      v.push_back(s);
    }
    {
      Scenario s;
      s.id = "singlespan";
      s.description = "single 205 km span, 11 channels, 96 GBaud on a 100 GHz grid";
      s.link = {205, 1, 0.2, 17, 1.3, 5, kLightSpeed / 1550e-9};
      s.wdm = {11, 96e9, 100e9, 0.04, 0};
      v.push_back(s);
    }
    {
      Scenario s;
      s.id = "reduced";
      s.description = "desk-scale validation link: 4x80 km, 5 channels, 32 GBaud / 37.5 GHz";
      s.link = {80, 4, 0.2, 17, 1.3, 5, kLightSpeed / 1550e-9};
      s.wdm = {5, 32e9, 37.5e9, 0.1, 0};
      s.sim.symbols_per_run = 1 << 13;
      s.sim.runs = 2;
      v.push_back(s);
    }
    return v;
  }();
  return lib;
}

Scenario get_scenario(const std::string& id) {
  for (const auto& s : builtin_scenarios())
    if (s.id == id) return s;
  std::string avail;
  for (const auto& s : builtin_scenarios()) avail += (avail.empty() ? "" : ", ") + s.id;
  throw std::invalid_argument("unknown scenario '" + id + "'; built-ins: " + avail);
}

Scenario scenario_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  json j;
  in >> j;
  return from_json(j);
}

std::string scenario_to_json(const Scenario& s) { return to_json(s).dump(2); }

std::string config_hash(const Scenario& s) {
  Sha1 sha;
  return sha.digest(to_json(s).dump());
}

}  // namespace mdshape
