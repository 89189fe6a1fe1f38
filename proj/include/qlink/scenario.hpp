#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qlink/channel.hpp"
#include "qlink/detection.hpp"
#include "qlink/source.hpp"

namespace qlink {

/// Signal analyzer output that triggers Bob. `open` means no signal analyzer.
enum class SignalState { H, V, D, A, open };

[[nodiscard]] inline std::string_view to_string(SignalState s) {
  switch (s) {
    case SignalState::H: return "H";
    case SignalState::V: return "V";
    case SignalState::D: return "D";
    case SignalState::A: return "A";
    case SignalState::open: return "open";
  }
  return "?";
}

[[nodiscard]] inline std::optional<SignalState> signal_state_from_string(std::string_view s) {
  if (s == "H") return SignalState::H;
  if (s == "V") return SignalState::V;
  if (s == "D") return SignalState::D;
  if (s == "A") return SignalState::A;
  if (s == "open") return SignalState::open;
  return std::nullopt;
}

/// Analyzer polarization angle of a signal state, degrees from H.
[[nodiscard]] inline double signal_angle_deg(SignalState s) {
  switch (s) {
    case SignalState::H: return 0.0;
    case SignalState::V: return 90.0;
    case SignalState::D: return 45.0;
    case SignalState::A: return 135.0;
    case SignalState::open: return 0.0;
  }
  return 0.0;
}

[[nodiscard]] constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct AnalyzerSetting {
  SignalState signal = SignalState::H;
  double idler_angle_deg = 0.0;  // analyzer polarization angle (half-wave plate at half this)
  bool operator==(const AnalyzerSetting&) const = default;
};

enum class RunMode { budget, monte_carlo };

[[nodiscard]] inline std::string_view to_string(RunMode m) {
  return m == RunMode::budget ? "budget" : "monte-carlo";
}

struct RunSettings {
  RunMode mode = RunMode::budget;
  double duration_s = 10.0;
  std::uint64_t seed = 42;
  std::vector<AnalyzerSetting> settings;  // empty: default parallel/orthogonal set
  bool operator==(const RunSettings&) const = default;
};

struct Scenario {
  std::string name = "unnamed";
  TwoCrystalSource source;
  CompensatorStack compensators;
  OverlapModel overlap;
  // Idler in-coupling loss at Alice given the signal is coupled (heralding efficiency).
  double alice_coupling_loss_db = 0.0;

  ChannelChain channel;
  SyncChannel sync;
  SyncReceiver sync_rx;
  double receiver_delay_error_ns = 0.0;  // residual gate-centre misalignment
  PolarizationDriftModel drift;

  bool signal_analyzer = true;  // passive 50/50 basis choice with four outputs
  double signal_analyzer_loss_db = 0.0;
  FreeRunningDetector signal_detector;
  bool idler_analyzer = true;
  double bob_analyzer_loss_db = 0.0;
  GatedDetector idler_detector;
  bool uncorrelated_idler_background = true;
  TimeDiscriminator tdc;

  RunSettings run;

  bool operator==(const Scenario&) const = default;
};

struct Violation {
  std::string field;
  std::string message;
  bool operator==(const Violation&) const = default;
};

/// Settings used when a run does not list any: parallel and orthogonal idler
/// analyzer for each of the four signal states.
[[nodiscard]] inline std::vector<AnalyzerSetting> default_settings(const Scenario& s) {
  std::vector<AnalyzerSetting> out;
  if (!s.signal_analyzer) {
    out.push_back({SignalState::open, 0.0});
    if (s.idler_analyzer) out.push_back({SignalState::open, 90.0});
    return out;
  }
  for (auto st : {SignalState::H, SignalState::V, SignalState::D, SignalState::A}) {
    out.push_back({st, signal_angle_deg(st)});
    if (s.idler_analyzer) out.push_back({st, signal_angle_deg(st) + 90.0});
  }
  return out;
}

[[nodiscard]] inline std::vector<AnalyzerSetting> effective_settings(const Scenario& s, const RunSettings& rs) {
  return rs.settings.empty() ? default_settings(s) : rs.settings;
}

namespace detail {

inline void require(std::vector<Violation>& out, bool ok, std::string field, std::string message) {
  if (!ok) out.push_back({std::move(field), std::move(message)});
}

[[nodiscard]] inline bool finite(double x) { return std::isfinite(x); }
[[nodiscard]] inline bool probability(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace detail

/// Component invariants and cross-module constraints, excluding the sync budget.
[[nodiscard]] inline std::vector<Violation> validate_components(const Scenario& s) {
  using detail::require;
  using detail::finite;
  using detail::probability;
  std::vector<Violation> v;
  const auto& src = s.source;

  require(v, src.brightness > 0.0 && finite(src.brightness), "source.brightness_pairs_per_s_thz_mw", "must be > 0");
  require(v, src.pump_power_per_crystal_mw >= 0.0 && finite(src.pump_power_per_crystal_mw),
          "source.pump_power_per_crystal_mw", "must be >= 0");
  require(v, src.crystals_pumped == 1 || src.crystals_pumped == 2, "source.crystals_pumped", "must be 1 or 2");
  require(v, src.crystal_length_mm > 0.0, "source.crystal_length_mm", "must be > 0");
  require(v, src.pump.nm > 0.0, "source.pump_wavelength_nm", "must be > 0");
  require(v, src.signal.nm > 0.0, "source.signal_wavelength_nm", "must be > 0");
  require(v, src.idler.nm > 0.0, "source.idler_wavelength_nm", "must be > 0");
  require(v, src.idler_bandwidth.fwhm_nm > 0.0, "source.idler_bandwidth_nm", "must be > 0");
  require(v, src.idler_coherence_time_ps > 0.0, "source.idler_coherence_time_ps", "must be > 0");
  require(v, finite(src.base_phase_rad), "source.base_phase_rad", "must be finite");
  require(v, finite(src.phase_temp_slope_rad_per_c), "source.phase_temp_slope_rad_per_c", "must be finite");
  require(v, finite(src.temperature_offset_c), "source.temperature_offset_c", "must be finite");
  require(v, probability(src.weight_v), "source.weight_v", "must be in [0, 1]");
  require(v, s.overlap.width_ps >= 0.0, "source.overlap_width_ps", "must be >= 0");
  require(v, s.alice_coupling_loss_db >= 0.0 && finite(s.alice_coupling_loss_db), "source.alice_coupling_loss_db",
          "must be >= 0");
  if (src.pump.nm > 0.0 && src.signal.nm > 0.0 && src.idler.nm > 0.0) {
    const auto ec = energy_conservation_check(src.pump, src.signal, src.idler);
    require(v, ec.passed, "source.signal_wavelength_nm",
            "energy conservation violated (relative residual " + std::to_string(ec.residual) + ")");
  }
  for (std::size_t i = 0; i < s.compensators.delays_ps.size(); ++i)
    require(v, finite(s.compensators.delays_ps[i]), "compensators.delays_ps[" + std::to_string(i) + "]",
            "must be finite");

  for (std::size_t i = 0; i < s.channel.size(); ++i) {
    const std::string prefix = "channel[" + std::to_string(i) + "].";
    if (const auto* f = std::get_if<FiberSpan>(&s.channel[i])) {
      require(v, f->length_km >= 0.0 && finite(f->length_km), prefix + "length_km", "must be >= 0");
      require(v, f->attenuation_db_per_km >= 0.0, prefix + "attenuation_db_per_km", "must be >= 0");
      require(v, f->dispersion_ps_per_nm_km >= 0.0, prefix + "dispersion_ps_per_nm_km", "must be >= 0");
    } else {
      const auto& fl = std::get<Filter>(s.channel[i]);
      require(v, fl.insertion_loss_db >= 0.0, prefix + "insertion_loss_db", "must be >= 0");
      require(v, fl.isolation_db >= 0.0, prefix + "isolation_db", "must be >= 0");
      require(v, fl.center.nm > 0.0, prefix + "center_nm", "must be > 0");
      require(v, fl.flat_top_width_nm >= 0.0, prefix + "flat_top_width_nm", "must be >= 0");
      require(v, fl.fwhm_nm >= fl.flat_top_width_nm, prefix + "fwhm_nm", "must be >= flat_top_width_nm");
    }
  }

  const auto& sy = s.sync;
  require(v, sy.wavelength.nm > 0.0, "sync.wavelength_nm", "must be > 0");
  require(v, sy.pulse_width_ns > 0.0, "sync.pulse_width_ns", "must be > 0");
  require(v, finite(sy.offset_behind_photon_ns), "sync.offset_behind_photon_ns", "must be finite");
  require(v, finite(sy.launch_pulse_power_dbm), "sync.launch_pulse_power_dbm", "must be finite");
  require(v, sy.receiver_isolation_db >= 0.0, "sync.receiver_isolation_db", "must be >= 0");
  require(v, sy.mux_isolation_db >= 0.0, "sync.mux_isolation_db", "must be >= 0");
  for (std::size_t i = 0; i < sy.transmitter_filters_db.size(); ++i)
    require(v, sy.transmitter_filters_db[i] >= 0.0, "sync.transmitter_filters_db[" + std::to_string(i) + "]",
            "must be >= 0");
  require(v, s.sync_rx.latency_ns >= 0.0, "sync.receiver_latency_ns", "must be >= 0");
  require(v, finite(s.receiver_delay_error_ns), "sync.receiver_delay_error_ns", "must be finite");

  require(v, s.drift.drift_rate_rad_per_min >= 0.0, "drift.drift_rate_rad_per_min", "must be >= 0");
  require(v, finite(s.drift.initial_misalignment_rad), "drift.initial_misalignment_rad", "must be finite");

  require(v, probability(s.signal_detector.efficiency), "detectors.signal_efficiency", "must be in [0, 1]");
  require(v, s.signal_detector.dark_rate_hz >= 0.0, "detectors.signal_dark_rate_hz", "must be >= 0");
  require(v, s.signal_detector.output_pulse_width_ns > 0.0, "detectors.signal_pulse_width_ns", "must be > 0");
  require(v, s.signal_analyzer_loss_db >= 0.0, "detectors.signal_analyzer_loss_db", "must be >= 0");
  require(v, s.bob_analyzer_loss_db >= 0.0, "detectors.bob_analyzer_loss_db", "must be >= 0");
  const auto& g = s.idler_detector;
  require(v, probability(g.efficiency), "detectors.idler_efficiency", "must be in [0, 1]");
  require(v, g.gate_width_ns > 0.0, "detectors.idler_gate_ns", "must be > 0");
  require(v, g.holdoff_us >= 0.0, "detectors.idler_holdoff_us", "must be >= 0");
  require(v, g.dark_prob_per_gate >= 0.0 && g.dark_prob_per_gate < 1.0, "detectors.idler_dark_prob_per_gate",
          "must be in [0, 1)");
  require(v, g.timing_jitter_ps >= 0.0, "detectors.idler_timing_jitter_ps", "must be >= 0");

  require(v, s.tdc.overlap_window_ns > 0.0 && s.tdc.overlap_window_ns <= g.gate_width_ns, "tdc.overlap_window_ns",
          "must satisfy 0 < window <= idler gate width");
  require(v, s.tdc.true_coincidence_pass > 0.0 && s.tdc.true_coincidence_pass <= 1.0, "tdc.true_coincidence_pass",
          "must be in (0, 1]");

  require(v, s.run.duration_s > 0.0, "run.duration_s", "must be > 0");
  for (const auto& st : s.run.settings) {
    require(v, finite(st.idler_angle_deg), "run.settings", "idler angle must be finite");
    require(v, (st.signal == SignalState::open) == !s.signal_analyzer, "run.settings",
            std::string("signal state '") + std::string(to_string(st.signal)) +
                "' does not match detectors.signal_analyzer");
  }
  return v;
}

/// Full validation: component invariants plus the sync budget, which must close
/// unless the scenario explicitly allows it to fail.
[[nodiscard]] inline std::vector<Violation> validate_scenario(const Scenario& s) {
  auto v = validate_components(s);
  if (s.sync.multiplexed && !s.sync.allow_budget_failure) {
    const auto b = sync_power_at_receiver(s.sync, s.channel, s.sync_rx.threshold_dbm);
    if (!b.closes)
      v.push_back({"sync.launch_pulse_power_dbm", "sync budget does not close: " + std::to_string(b.received_dbm) +
                                                      " dBm received, threshold " +
                                                      std::to_string(s.sync_rx.threshold_dbm) + " dBm"});
  }
  return v;
}

}  // namespace qlink
