#include "fwm/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace fwm {
namespace {

void check_keys(const nlohmann::json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw std::invalid_argument("unknown key \"" + key + "\" in " + where);
  }
}

FilterSpec filter_from_json(const nlohmann::json& j, const char* where) {
  check_keys(j, where, {"center_nm", "width_nm", "shape"});
  FilterSpec f;
  // Scale by dividing with exact powers of ten so decimal inputs land on the
  // same doubles as the equivalent literals (keeps serialization stable).
  f.center_wavelength_m = j.at("center_nm").get<double>() / 1e9;
  f.width_m = j.at("width_nm").get<double>() / 1e9;
  const std::string shape = j.at("shape").get<std::string>();
  if (shape == "rectangular")
    f.shape = FilterShape::rectangular;
  else if (shape == "gaussian")
    f.shape = FilterShape::gaussian;
  else
    throw std::invalid_argument("unknown filter shape \"" + shape + "\" in " + where);
  return f;
}

nlohmann::json filter_to_json(const FilterSpec& f) {
  return {{"center_nm", f.center_wavelength_m * 1e9},
          {"width_nm", f.width_m * 1e9},
          {"shape", f.shape == FilterShape::rectangular ? "rectangular" : "gaussian"}};
}

DetectorSpec detector_from_json(const nlohmann::json& j, const char* where) {
  check_keys(j, where,
             {"quantum_efficiency", "path_transmission", "dark_count_rate_hz", "jitter_fwhm_ps",
              "dead_time_ps"});
  DetectorSpec d;
  d.quantum_efficiency = j.at("quantum_efficiency").get<double>();
  d.path_transmission = j.at("path_transmission").get<double>();
  d.dark_count_rate_hz = j.at("dark_count_rate_hz").get<double>();
  d.jitter_fwhm_ps = j.at("jitter_fwhm_ps").get<double>();
  d.dead_time_ps = j.value("dead_time_ps", std::int64_t{0});
  return d;
}

nlohmann::json detector_to_json(const DetectorSpec& d) {
  return {{"quantum_efficiency", d.quantum_efficiency},
          {"path_transmission", d.path_transmission},
          {"dark_count_rate_hz", d.dark_count_rate_hz},
          {"jitter_fwhm_ps", d.jitter_fwhm_ps},
          {"dead_time_ps", d.dead_time_ps}};
}

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

void validate(const Config& c) {
  require(c.fiber.core_radius_m > 0.0, "fiber.core_radius_um must be > 0");
  require(c.fiber.length_m > 0.0, "fiber.length_m must be > 0");
  require(c.fiber.mode_constant_u01 > 0.0, "fiber.mode_constant_u01 must be > 0");
  require(c.gas.pressure_pa >= 0.0, "gas.pressure_bar must be >= 0");
  require(c.gas.temperature_k > 0.0, "gas.temperature_k must be > 0");
  require(c.pump.wavelength_m > 0.0, "pump.wavelength_nm must be > 0");
  require(c.pump.pulse_fwhm_s > 0.0, "pump.pulse_fwhm_fs must be > 0");
  require(c.pump.average_power_w >= 0.0, "pump.average_power_mw must be >= 0");
  for (const FilterSpec* f : {&c.filter_signal, &c.filter_idler}) {
    require(f->center_wavelength_m > 0.0, "filter center_nm must be > 0");
    require(f->width_m > 0.0, "filter width_nm must be > 0");
  }
  require(c.source.eta_per_mw2 >= 0.0, "source.pairs_per_pulse_per_mw2 must be >= 0");
  require(c.source.raman_signal_per_mw >= 0.0, "source.raman_signal_per_pulse_per_mw must be >= 0");
  require(c.source.raman_idler_per_mw >= 0.0, "source.raman_idler_per_pulse_per_mw must be >= 0");
  require(!c.source.schmidt_lambdas.empty(), "source.schmidt_lambdas must not be empty");
  double lam_sum = 0.0;
  for (double lam : c.source.schmidt_lambdas) {
    require(lam >= 0.0, "source.schmidt_lambdas must be non-negative");
    lam_sum += lam;
  }
  require(lam_sum > 0.0, "source.schmidt_lambdas must not all be zero");
  require(c.detectors.size() == 2, "config needs exactly the signal and idler detectors");
  for (const DetectorSpec& d : c.detectors) {
    require(d.quantum_efficiency >= 0.0 && d.quantum_efficiency <= 1.0,
            "detector quantum_efficiency must be in [0, 1]");
    require(d.path_transmission >= 0.0 && d.path_transmission <= 1.0,
            "detector path_transmission must be in [0, 1]");
    require(d.dark_count_rate_hz >= 0.0, "detector dark_count_rate_hz must be >= 0");
    require(d.jitter_fwhm_ps >= 0.0, "detector jitter_fwhm_ps must be >= 0");
    require(d.dead_time_ps >= 0, "detector dead_time_ps must be >= 0");
  }
  require(c.correlation.bin_width_ps > 0, "correlation.bin_width_ps must be > 0");
  require(c.correlation.bins_per_side > 0, "correlation.bins_per_side must be > 0");
  require(c.correlation.window_half_ps > 0, "correlation.window_half_ps must be > 0");
  require(c.correlation.side_peaks >= 1, "correlation.side_peaks must be >= 1");
  require(c.sweep.pressure_bar_min <= c.sweep.pressure_bar_max,
          "sweep.pressure_bar_min must not exceed sweep.pressure_bar_max");
}

}  // namespace

Config default_config() {
  Config c;

  c.fiber.core_radius_m = 22e-6;
  c.fiber.length_m = 1.0;
  c.fiber.mode_constant_u01 = 2.404825557695773;
  c.fiber.gamma_w_inv_m_inv = 0.0;
  c.fiber.loss_db_per_m = 0.0;

  c.gas.pressure_pa = 4.0e5;
  c.gas.temperature_k = 293.0;
  // Single effective ultraviolet resonance reproducing the measured anomalous
  // dispersion of the filled capillary across the pump/signal/idler band.
  c.gas.refractivity.terms = {{2.616401557935e-02, 40.150243998856}};
  c.gas.refractivity.valid_lambda_min_m = 0.25e-6;
  c.gas.refractivity.valid_lambda_max_m = 2.2e-6;

  c.pump.wavelength_m = 1033e-9;
  c.pump.pulse_fwhm_s = 230e-15;
  c.pump.rep_rate_hz = 2.0e6;
  c.pump.average_power_w = 30e-3;

  c.filter_signal = {770e-9, 10e-9, FilterShape::rectangular};
  c.filter_idler = {1570e-9, 12e-9, FilterShape::rectangular};
  c.jsa_grid = 256;
  c.jsa_span_filter_widths = 4.0;

  c.source.eta_per_mw2 = 2.6e-6;
  // Leading Schmidt weights of the filtered joint amplitude at this setup.
  c.source.schmidt_lambdas = {0.907229, 0.089130, 0.003561, 0.000078};
  c.source.raman_signal_per_mw = 0.0;
  c.source.raman_idler_per_mw = 0.0;
  c.source.pulse_period_ps = 500000;

  DetectorSpec signal;
  signal.quantum_efficiency = 0.6;
  signal.path_transmission = 0.3;
  signal.dark_count_rate_hz = 313.0;
  signal.jitter_fwhm_ps = 350.0;
  signal.dead_time_ps = 0;
  DetectorSpec idler;
  idler.quantum_efficiency = 0.2;
  idler.path_transmission = 0.3;
  idler.dark_count_rate_hz = 2120.0;
  idler.jitter_fwhm_ps = 350.0;
  idler.dead_time_ps = 0;
  c.detectors = {signal, idler};

  return c;
}

Config config_from_json(const nlohmann::json& j) {
  check_keys(j, "config",
             {"fiber", "gas", "pump", "filters", "jsa", "source", "detectors", "correlation",
              "sweep"});
  Config c = default_config();

  if (j.contains("fiber")) {
    const auto& f = j.at("fiber");
    check_keys(f, "fiber",
               {"core_radius_um", "length_m", "mode_constant_u01", "gamma_per_w_m", "loss_db_per_m"});
    c.fiber.core_radius_m = f.at("core_radius_um").get<double>() / 1e6;
    c.fiber.length_m = f.at("length_m").get<double>();
    c.fiber.mode_constant_u01 = f.value("mode_constant_u01", c.fiber.mode_constant_u01);
    c.fiber.gamma_w_inv_m_inv = f.value("gamma_per_w_m", 0.0);
    c.fiber.loss_db_per_m = f.value("loss_db_per_m", 0.0);
  }

  if (j.contains("gas")) {
    const auto& g = j.at("gas");
    check_keys(g, "gas",
               {"pressure_bar", "temperature_k", "sellmeier_b", "sellmeier_c_um2",
                "valid_wavelength_um"});
    c.gas.pressure_pa = g.at("pressure_bar").get<double>() * 1e5;
    c.gas.temperature_k = g.at("temperature_k").get<double>();
    if (g.contains("sellmeier_b") || g.contains("sellmeier_c_um2")) {
      const auto b = g.at("sellmeier_b").get<std::vector<double>>();
      const auto cc = g.at("sellmeier_c_um2").get<std::vector<double>>();
      if (b.size() != cc.size() || b.empty())
        throw std::invalid_argument("sellmeier_b and sellmeier_c_um2 must have equal nonzero size");
      c.gas.refractivity.terms.clear();
      for (std::size_t i = 0; i < b.size(); ++i) c.gas.refractivity.terms.push_back({b[i], cc[i]});
    }
    if (g.contains("valid_wavelength_um")) {
      const auto band = g.at("valid_wavelength_um").get<std::vector<double>>();
      if (band.size() != 2 || !(band[0] < band[1]))
        throw std::invalid_argument("valid_wavelength_um must be [min, max]");
      c.gas.refractivity.valid_lambda_min_m = band[0] / 1e6;
      c.gas.refractivity.valid_lambda_max_m = band[1] / 1e6;
    }
  }

  if (j.contains("pump")) {
    const auto& p = j.at("pump");
    check_keys(p, "pump", {"wavelength_nm", "pulse_fwhm_fs", "rep_rate_mhz", "average_power_mw"});
    c.pump.wavelength_m = p.at("wavelength_nm").get<double>() / 1e9;
    c.pump.pulse_fwhm_s = p.at("pulse_fwhm_fs").get<double>() / 1e15;
    c.pump.rep_rate_hz = p.at("rep_rate_mhz").get<double>() * 1e6;
    c.pump.average_power_w = p.at("average_power_mw").get<double>() / 1e3;
  }

  if (j.contains("filters")) {
    const auto& f = j.at("filters");
    check_keys(f, "filters", {"signal", "idler"});
    if (f.contains("signal")) c.filter_signal = filter_from_json(f.at("signal"), "filters.signal");
    if (f.contains("idler")) c.filter_idler = filter_from_json(f.at("idler"), "filters.idler");
  }

  if (j.contains("jsa")) {
    const auto& s = j.at("jsa");
    check_keys(s, "jsa", {"grid_points", "span_filter_widths"});
    c.jsa_grid = s.value("grid_points", c.jsa_grid);
    c.jsa_span_filter_widths = s.value("span_filter_widths", c.jsa_span_filter_widths);
    if (c.jsa_grid < 8) throw std::invalid_argument("jsa.grid_points must be >= 8");
  }

  if (j.contains("source")) {
    const auto& s = j.at("source");
    check_keys(s, "source",
               {"pairs_per_pulse_per_mw2", "schmidt_lambdas", "raman_signal_per_pulse_per_mw",
                "raman_idler_per_pulse_per_mw", "pair_statistics"});
    c.source.eta_per_mw2 = s.value("pairs_per_pulse_per_mw2", c.source.eta_per_mw2);
    if (s.contains("schmidt_lambdas"))
      c.source.schmidt_lambdas = s.at("schmidt_lambdas").get<std::vector<double>>();
    c.source.raman_signal_per_mw = s.value("raman_signal_per_pulse_per_mw", 0.0);
    c.source.raman_idler_per_mw = s.value("raman_idler_per_pulse_per_mw", 0.0);
    const std::string stats = s.value("pair_statistics", std::string("thermal"));
    if (stats == "poisson")
      c.source.poisson_pairs = true;
    else if (stats != "thermal")
      throw std::invalid_argument("source.pair_statistics must be \"thermal\" or \"poisson\"");
  }

  if (j.contains("detectors")) {
    const auto& d = j.at("detectors");
    check_keys(d, "detectors", {"signal", "idler"});
    c.detectors[0] = detector_from_json(d.at("signal"), "detectors.signal");
    c.detectors[1] = detector_from_json(d.at("idler"), "detectors.idler");
  }

  if (j.contains("correlation")) {
    const auto& r = j.at("correlation");
    check_keys(r, "correlation", {"bin_width_ps", "bins_per_side", "window_half_ps", "side_peaks"});
    c.correlation.bin_width_ps = r.value("bin_width_ps", c.correlation.bin_width_ps);
    c.correlation.bins_per_side = r.value("bins_per_side", c.correlation.bins_per_side);
    c.correlation.window_half_ps = r.value("window_half_ps", c.correlation.window_half_ps);
    c.correlation.side_peaks = r.value("side_peaks", c.correlation.side_peaks);
  }

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, "sweep", {"pressure_bar_min", "pressure_bar_max", "pressure_bar_step"});
    c.sweep.pressure_bar_min = s.value("pressure_bar_min", c.sweep.pressure_bar_min);
    c.sweep.pressure_bar_max = s.value("pressure_bar_max", c.sweep.pressure_bar_max);
    c.sweep.pressure_bar_step = s.value("pressure_bar_step", c.sweep.pressure_bar_step);
    if (!(c.sweep.pressure_bar_step > 0.0))
      throw std::invalid_argument("sweep.pressure_bar_step must be > 0");
  }

  // The tag clock is tied to the pump repetition rate.
  if (!(c.pump.rep_rate_hz > 0.0))
    throw std::invalid_argument("pump.rep_rate_mhz must be > 0");
  const double period_ps = 1e12 / c.pump.rep_rate_hz;
  c.source.pulse_period_ps = static_cast<std::int64_t>(std::llround(period_ps));
  if (c.source.pulse_period_ps <= 0)
    throw std::invalid_argument("pump.rep_rate_mhz implies a non-positive pulse period");

  validate(c);
  return c;
}

nlohmann::json config_to_json(const Config& c) {
  nlohmann::json j;
  j["fiber"] = {{"core_radius_um", c.fiber.core_radius_m * 1e6},
                {"length_m", c.fiber.length_m},
                {"mode_constant_u01", c.fiber.mode_constant_u01},
                {"gamma_per_w_m", c.fiber.gamma_w_inv_m_inv},
                {"loss_db_per_m", c.fiber.loss_db_per_m}};
  std::vector<double> b;
  std::vector<double> cc;
  for (const SellmeierTerm& t : c.gas.refractivity.terms) {
    b.push_back(t.b);
    cc.push_back(t.c_um2);
  }
  j["gas"] = {{"pressure_bar", c.gas.pressure_pa / 1e5},
              {"temperature_k", c.gas.temperature_k},
              {"sellmeier_b", b},
              {"sellmeier_c_um2", cc},
              {"valid_wavelength_um",
               {c.gas.refractivity.valid_lambda_min_m * 1e6,
                c.gas.refractivity.valid_lambda_max_m * 1e6}}};
  j["pump"] = {{"wavelength_nm", c.pump.wavelength_m * 1e9},
               {"pulse_fwhm_fs", c.pump.pulse_fwhm_s * 1e15},
               {"rep_rate_mhz", c.pump.rep_rate_hz / 1e6},
               {"average_power_mw", c.pump.average_power_w * 1e3}};
  j["filters"] = {{"signal", filter_to_json(c.filter_signal)},
                  {"idler", filter_to_json(c.filter_idler)}};
  j["jsa"] = {{"grid_points", c.jsa_grid}, {"span_filter_widths", c.jsa_span_filter_widths}};
  j["source"] = {{"pairs_per_pulse_per_mw2", c.source.eta_per_mw2},
                 {"schmidt_lambdas", c.source.schmidt_lambdas},
                 {"raman_signal_per_pulse_per_mw", c.source.raman_signal_per_mw},
                 {"raman_idler_per_pulse_per_mw", c.source.raman_idler_per_mw},
                 {"pair_statistics", c.source.poisson_pairs ? "poisson" : "thermal"}};
  j["detectors"] = {{"signal", detector_to_json(c.detectors.at(0))},
                    {"idler", detector_to_json(c.detectors.at(1))}};
  j["correlation"] = {{"bin_width_ps", c.correlation.bin_width_ps},
                      {"bins_per_side", c.correlation.bins_per_side},
                      {"window_half_ps", c.correlation.window_half_ps},
                      {"side_peaks", c.correlation.side_peaks}};
  j["sweep"] = {{"pressure_bar_min", c.sweep.pressure_bar_min},
                {"pressure_bar_max", c.sweep.pressure_bar_max},
                {"pressure_bar_step", c.sweep.pressure_bar_step}};
  return j;
}

Config load_config(const std::string& path) {
  if (path.empty()) return default_config();
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const Config& config) {
  const std::string dump = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace fwm
