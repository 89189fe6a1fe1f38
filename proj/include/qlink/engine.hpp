#pragma once

// Runs experiments on a Scenario: closed-form budget, seeded event-level
// Monte Carlo, visibility curves and parameter sweeps.
//
// Both modes share one link model. A run for an analyzer setting gates Bob's
// detector with the clicks of the selected signal detector; every other pair
// still contributes idler photons that can land in a gate.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "qlink/analysis.hpp"
#include "qlink/channel.hpp"
#include "qlink/counts.hpp"
#include "qlink/detection.hpp"
#include "qlink/random.hpp"
#include "qlink/scenario.hpp"
#include "qlink/scenario_io.hpp"
#include "qlink/source.hpp"

namespace qlink {

/// Raised when a Monte Carlo run would exceed the event budget.
class EventGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMaxMonteCarloEvents = 1e9;

/// Quantities derived once from a scenario and shared by both run modes.
struct LinkModel {
  PairState state;
  double emission_rate = 0.0;       // signal-coupled pairs per second
  double signal_efficiency = 0.0;   // analyzer transmission x quantum efficiency
  double signal_dark_rate = 0.0;
  double idler_survival = 0.0;      // heralding x channel x Bob analyzer x efficiency
  double leak_detected_rate = 0.0;  // leak photons/s that would be detected in an open gate
  double jitter_sigma_ns = 0.0;
  double gate_ns = 2.5;
  double window_ns = 2.5;
  double tdc_pass = 1.0;
  double dark_prob = 0.0;
  double delay_error_ns = 0.0;
  double misalignment_rad = 0.0;
  bool gates_enabled = true;
  bool signal_analyzer = true;
  bool idler_analyzer = true;
  bool uncorrelated_background = true;
  GatedDetector idler;
  ChannelBudget channel;
};

[[nodiscard]] inline LinkModel link_model(const Scenario& s) {
  LinkModel m;
  m.state = pair_state(s.source, s.compensators, s.overlap);
  const double heralding = std::pow(10.0, -s.alice_coupling_loss_db / 10.0);
  m.emission_rate = pair_flux_in_fiber(s.source).per_second / heralding;
  m.signal_efficiency = std::pow(10.0, -s.signal_analyzer_loss_db / 10.0) * s.signal_detector.efficiency;
  m.signal_dark_rate = s.signal_detector.dark_rate_hz;

  m.channel = channel_budget(s.sync, s.channel, s.source.idler_bandwidth, s.idler_detector.gate_width_ns,
                             s.sync_rx.threshold_dbm, s.source.idler);
  m.gates_enabled = m.channel.sync_closes;
  const double bob = std::pow(10.0, -s.bob_analyzer_loss_db / 10.0);
  m.idler_survival = heralding * m.channel.quantum_transmittance * bob * s.idler_detector.efficiency;
  m.leak_detected_rate = m.channel.leakage_flux_at_detector.per_second * s.idler_detector.efficiency;

  const double fwhm_ps = std::hypot(m.channel.arrival_spread_fwhm_ps, s.idler_detector.timing_jitter_ps);
  m.jitter_sigma_ns = fwhm_ps * 1e-3 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  m.gate_ns = s.idler_detector.gate_width_ns;
  m.window_ns = counting_window_ns(s.idler_detector, s.tdc);
  m.tdc_pass = s.tdc.enabled ? s.tdc.true_coincidence_pass : 1.0;
  m.dark_prob = s.idler_detector.dark_prob_per_gate;
  m.delay_error_ns = s.receiver_delay_error_ns;
  m.misalignment_rad = s.drift.initial_misalignment_rad;
  m.signal_analyzer = s.signal_analyzer;
  m.idler_analyzer = s.idler_analyzer;
  m.uncorrelated_background = s.uncorrelated_idler_background;
  m.idler = s.idler_detector;
  return m;
}

/// Analyzer-level probabilities for one trigger detector and idler analyzer angle.
struct PathProbabilities {
  double route = 0.0;       // signal reaches the trigger detector's output
  double joint = 0.0;       // ... and the idler passes Bob's analyzer
  double idler_pass = 0.0;  // idler passes Bob's analyzer, any signal outcome
};

[[nodiscard]] inline PathProbabilities path_probabilities(const LinkModel& m, SignalState signal,
                                                          double idler_angle_rad) {
  PathProbabilities p;
  const double theta_a = deg_to_rad(signal_angle_deg(signal));
  p.idler_pass = m.idler_analyzer ? idler_marginal(idler_angle_rad, m.state) : 1.0;
  if (m.signal_analyzer) {
    p.route = 0.5 * signal_marginal(theta_a, m.state);
    p.joint = m.idler_analyzer ? 0.5 * coincidence_probability(theta_a, idler_angle_rad, m.state) : p.route;
  } else {
    p.route = 1.0;
    p.joint = p.idler_pass;
  }
  return p;
}

namespace engine_detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Probability that the partner photon lands inside the gate.
inline double gate_capture(const LinkModel& m) {
  const double half = 0.5 * m.gate_ns;
  if (m.jitter_sigma_ns <= 0.0) return std::abs(m.delay_error_ns) <= half ? 1.0 : 0.0;
  return normal_cdf((half - m.delay_error_ns) / m.jitter_sigma_ns) -
         normal_cdf((-half - m.delay_error_ns) / m.jitter_sigma_ns);
}

inline void check_run_preconditions(const Scenario& s) {
  const auto v = validate_components(s);
  if (!v.empty()) throw std::invalid_argument("invalid scenario: " + v.front().field + ": " + v.front().message);
}

inline std::string sync_warning(const LinkModel& m) {
  return "sync budget does not close (" + std::to_string(m.channel.sync_received_power_dbm) +
         " dBm at receiver); no gates opened";
}

}  // namespace engine_detail

/// Expected rates for a single analyzer setting.
[[nodiscard]] inline SettingCounts budget_setting(const LinkModel& m, const AnalyzerSetting& setting) {
  SettingCounts out;
  out.setting = setting;
  const auto p = path_probabilities(m, setting.signal, deg_to_rad(setting.idler_angle_deg) + m.misalignment_rad);

  const double true_triggers = m.emission_rate * p.route * m.signal_efficiency;
  const double triggers = true_triggers + m.signal_dark_rate;
  out.signal_singles_rate = triggers;
  out.trigger_rate = triggers;
  if (!(triggers > 0.0) || !m.gates_enabled) return out;

  const double cond = p.route > 0.0 ? p.joint / p.route : 0.0;
  const double p_true = (true_triggers / triggers) * m.idler_survival * cond * engine_detail::gate_capture(m);
  const double bg = (m.uncorrelated_background ? m.emission_rate * m.idler_survival * p.idler_pass : 0.0) +
                    m.leak_detected_rate;
  const double q_gate = 1.0 - (1.0 - m.dark_prob) * std::exp(-bg * m.gate_ns * 1e-9);
  const double q_window =
      1.0 - (1.0 - m.dark_prob * m.window_ns / m.gate_ns) * std::exp(-bg * m.window_ns * 1e-9);
  const double avalanche = 1.0 - (1.0 - p_true) * (1.0 - q_gate);
  const double registered = 1.0 - (1.0 - m.tdc_pass * p_true) * (1.0 - q_window);

  out.gate_rate = open_gate_rate(triggers, m.idler, avalanche);
  out.coincidence_rate = out.gate_rate * registered;
  out.accidental_rate = out.gate_rate * q_window;
  return out;
}

[[nodiscard]] inline CountsReport run_budget(const Scenario& s, const RunSettings& rs) {
  engine_detail::check_run_preconditions(s);
  const auto m = link_model(s);
  CountsReport r;
  r.mode = RunMode::budget;
  r.duration_s = rs.duration_s;
  r.seed = rs.seed;
  for (const auto& st : effective_settings(s, rs)) r.settings.push_back(budget_setting(m, st));
  if (!m.gates_enabled) r.warnings.push_back(engine_detail::sync_warning(m));
  return r;
}

namespace engine_detail {

struct Arrival {
  double time_ns;
  std::uint64_t pair;
};

struct PendingGate {
  double center_ns;
  std::uint64_t pair;
};

inline constexpr std::uint64_t kNoPartner = std::numeric_limits<std::uint64_t>::max();
inline constexpr double kJitterTruncation = 8.0;  // sigmas
inline constexpr double kDriftStepS = 1.0;

// One Monte Carlo realisation of a setting: a single sequential timeline.
class SettingSimulation {
 public:
  SettingSimulation(const LinkModel& m, const PolarizationDriftModel& drift, const AnalyzerSetting& setting,
                    double duration_s, std::uint64_t seed)
      : m_(m),
        setting_(setting),
        duration_ns_(duration_s * 1e9),
        rng_(seed),
        drift_rng_(derive_seed(seed, 0xD1F7)),
        drift_(drift) {
    update_thresholds();
  }

  SettingCounts run() {
    // Only pairs that can trigger or reach Bob are generated (thinned Poisson process).
    const double pair_rate_per_ns = m_.emission_rate * cut_bound_ * 1e-9;
    const double dark_rate_per_ns = m_.signal_dark_rate * 1e-9;
    const double horizon = kJitterTruncation * m_.jitter_sigma_ns;

    double next_pair = pair_rate_per_ns > 0.0 ? exponential(pair_rate_per_ns) : inf();
    double next_dark = dark_rate_per_ns > 0.0 ? exponential(dark_rate_per_ns) : inf();
    double next_drift = kDriftStepS * 1e9;
    std::uint64_t pair_id = 0;

    while (true) {
      const double t = std::min(next_pair, next_dark);
      if (!(t < duration_ns_)) break;
      while (next_drift <= t) {
        drift_.advance(kDriftStepS / 60.0, drift_rng_);
        update_thresholds();
        next_drift += kDriftStepS * 1e9;
      }
      while (!pending_.empty() && pending_.front().center_ns + 0.5 * m_.gate_ns < t - horizon) {
        finalize(pending_.front());
        pending_.pop_front();
      }
      if (next_dark < next_pair) {
        trigger(t, kNoPartner);
        next_dark = t + exponential(dark_rate_per_ns);
        continue;
      }
      emit_pair(t, pair_id++);
      next_pair = t + exponential(pair_rate_per_ns);
    }
    for (const auto& g : pending_) finalize(g);
    pending_.clear();

    const double dur = duration_ns_ * 1e-9;
    counts_.setting = setting_;
    counts_.triggers = counts_.signal_singles;
    counts_.signal_singles_rate = static_cast<double>(counts_.signal_singles) / dur;
    counts_.trigger_rate = static_cast<double>(counts_.triggers) / dur;
    counts_.gate_rate = static_cast<double>(counts_.gates) / dur;
    counts_.coincidence_rate = static_cast<double>(counts_.coincidences) / dur;
    counts_.accidental_rate = static_cast<double>(counts_.accidentals) / dur;
    return counts_;
  }

 private:
  static double inf() { return std::numeric_limits<double>::infinity(); }

  double exponential(double rate_per_ns) { return -std::log1p(-uniform01(rng_)) / rate_per_ns; }

  void update_thresholds() {
    const auto p = path_probabilities(m_, setting_.signal, deg_to_rad(setting_.idler_angle_deg) + drift_.angle());
    const double trig = p.route * m_.signal_efficiency;
    const double trig_and_idler = m_.idler_survival * p.joint * m_.signal_efficiency;
    const double idler_only =
        m_.uncorrelated_background ? m_.idler_survival * (p.idler_pass - p.joint * m_.signal_efficiency) : 0.0;
    cut_trig_idler_ = trig_and_idler;
    cut_trig_ = trig;
    cut_idler_only_ = trig + std::max(0.0, idler_only);
    // drift only moves Bob's analyzer, so this bound holds for the whole run
    if (cut_bound_ == 0.0) cut_bound_ = std::min(1.0, trig + (m_.uncorrelated_background ? m_.idler_survival : 0.0));
  }

  void emit_pair(double t, std::uint64_t id) {
    // One uniform selects among: trigger with idler, trigger alone, idler alone, neither.
    const double u = uniform01(rng_) * cut_bound_;
    if (u >= cut_idler_only_) return;
    const bool triggered = u < cut_trig_;
    const bool idler = u < cut_trig_idler_ || u >= cut_trig_;
    if (idler) {
      double j = m_.jitter_sigma_ns > 0.0 ? m_.jitter_sigma_ns * normal_(rng_) : 0.0;
      const double cap = kJitterTruncation * m_.jitter_sigma_ns;
      j = std::clamp(j, -cap, cap);
      arrivals_.push_back({t + j, id});
    }
    if (triggered) trigger(t, id);
  }

  void trigger(double t, std::uint64_t id) {
    ++counts_.signal_singles;
    pending_.push_back({t + m_.delay_error_ns, id});
  }

  void finalize(const PendingGate& g) {
    const double half_gate = 0.5 * m_.gate_ns;
    const double half_window = 0.5 * m_.window_ns;
    while (!arrivals_.empty() && arrivals_.front().time_ns < g.center_ns - half_gate) arrivals_.pop_front();

    if (!m_.gates_enabled) return;
    if (g.center_ns < holdoff_until_ns_) return;
    ++counts_.gates;

    bool partner = false, acc_gate = false, acc_window = false;
    for (const auto& a : arrivals_) {
      const double dt = std::abs(a.time_ns - g.center_ns);
      if (dt > half_gate) continue;
      if (a.pair == g.pair) {
        partner = true;
      } else {
        acc_gate = true;
        if (dt <= half_window) acc_window = true;
      }
    }
    if (m_.dark_prob > 0.0 && uniform01(rng_) < m_.dark_prob) {
      acc_gate = true;
      if (std::abs(uniform01(rng_) - 0.5) * m_.gate_ns <= half_window) acc_window = true;
    }
    if (m_.leak_detected_rate > 0.0) {
      const double in_window = 1.0 - std::exp(-m_.leak_detected_rate * m_.window_ns * 1e-9);
      const double outside = 1.0 - std::exp(-m_.leak_detected_rate * (m_.gate_ns - m_.window_ns) * 1e-9);
      if (uniform01(rng_) < in_window) acc_gate = acc_window = true;
      if (outside > 0.0 && uniform01(rng_) < outside) acc_gate = true;
    }
    const bool kept = partner && (m_.tdc_pass >= 1.0 || uniform01(rng_) < m_.tdc_pass);
    const bool avalanche = partner || acc_gate;
    if (kept || acc_window) ++counts_.coincidences;
    if (acc_window) ++counts_.accidentals;

    const double holdoff_ns = m_.idler.holdoff_us * 1e3;
    if (m_.idler.holdoff_semantics == HoldoffSemantics::after_every_gate || avalanche)
      holdoff_until_ns_ = g.center_ns + holdoff_ns;
  }

  const LinkModel& m_;
  AnalyzerSetting setting_;
  double duration_ns_;
  Rng rng_;
  Rng drift_rng_;
  PolarizationDrift drift_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double cut_trig_idler_ = 0.0, cut_trig_ = 0.0, cut_idler_only_ = 0.0, cut_bound_ = 0.0;
  std::deque<Arrival> arrivals_;
  std::deque<PendingGate> pending_;
  double holdoff_until_ns_ = -std::numeric_limits<double>::infinity();
  SettingCounts counts_;
};

}  // namespace engine_detail

/// Expected number of timeline events for one setting of a Monte Carlo run.
[[nodiscard]] inline double expected_events(const Scenario& s, double duration_s) {
  return (pair_flux_in_fiber(s.source).per_second / std::pow(10.0, -s.alice_coupling_loss_db / 10.0) +
          s.signal_detector.dark_rate_hz) *
         duration_s;
}

[[nodiscard]] inline SettingCounts simulate_setting(const Scenario& s, const LinkModel& m,
                                                    const AnalyzerSetting& setting, double duration_s,
                                                    std::uint64_t seed) {
  return engine_detail::SettingSimulation(m, s.drift, setting, duration_s, seed).run();
}

[[nodiscard]] inline CountsReport run_monte_carlo(const Scenario& s, const RunSettings& rs) {
  engine_detail::check_run_preconditions(s);
  if (!(rs.duration_s > 0.0)) throw std::invalid_argument("run_monte_carlo: duration must be positive");
  const double events = expected_events(s, rs.duration_s);
  if (events > kMaxMonteCarloEvents)
    throw EventGuardError("Monte Carlo run refused: " + std::to_string(events) + " expected events exceed the " +
                          std::to_string(kMaxMonteCarloEvents) + " event guard");
  const auto m = link_model(s);
  CountsReport r;
  r.mode = RunMode::monte_carlo;
  r.duration_s = rs.duration_s;
  r.seed = rs.seed;
  const auto settings = effective_settings(s, rs);
  for (std::size_t i = 0; i < settings.size(); ++i)
    r.settings.push_back(simulate_setting(s, m, settings[i], rs.duration_s, derive_seed(rs.seed, i)));
  if (!m.gates_enabled) r.warnings.push_back(engine_detail::sync_warning(m));
  return r;
}

[[nodiscard]] inline CountsReport run(const Scenario& s, const RunSettings& rs) {
  return rs.mode == RunMode::budget ? run_budget(s, rs) : run_monte_carlo(s, rs);
}

/// Coincidence rate against idler analyzer angle for one signal state.
[[nodiscard]] inline VisibilityCurve visibility_curve(const Scenario& s, SignalState signal,
                                                      std::span<const double> angles_deg, const RunSettings& rs) {
  for (std::size_t i = 1; i < angles_deg.size(); ++i)
    if (!(angles_deg[i] > angles_deg[i - 1]))
      throw std::invalid_argument("visibility_curve: angle grid must be strictly increasing");
  RunSettings curve_run = rs;
  curve_run.settings.clear();
  for (double a : angles_deg) curve_run.settings.push_back({signal, a});
  const auto report = run(s, curve_run);

  VisibilityCurve c;
  c.signal = signal;
  c.angles_deg.assign(angles_deg.begin(), angles_deg.end());
  for (const auto& sc : report.settings) c.rates_hz.push_back(sc.coincidence_rate);
  const auto fit = fit_visibility(c.angles_deg, c.rates_hz);
  c.visibility = fit.visibility;
  c.method = fit.method;
  return c;
}

/// Evenly spaced grid over [0, 180] degrees.
[[nodiscard]] inline std::vector<double> angle_grid(std::size_t points) {
  if (points < 2) throw std::invalid_argument("angle_grid: need at least 2 points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = 180.0 * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

struct SweepPoint {
  double value = 0.0;
  Scenario scenario;  // the variant that was run
  CountsReport report;
  bool operator==(const SweepPoint&) const = default;
};

/// Independent runs per value of a numeric scenario field. Seeds derive from
/// (master seed, index), and results are ordered by index, so `threads` does
/// not affect the output.
[[nodiscard]] inline std::vector<SweepPoint> sweep(const Scenario& s, std::string_view path,
                                                   std::span<const double> values, const RunSettings& rs,
                                                   unsigned threads = 1) {
  std::vector<Scenario> variants;
  variants.reserve(values.size());
  for (double v : values) {
    Scenario copy = s;
    set_numeric_field(copy, path, v);
    variants.push_back(std::move(copy));
  }
  std::vector<SweepPoint> out(values.size());
  std::vector<std::exception_ptr> errors(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      try {
        RunSettings point = rs;
        point.seed = derive_seed(rs.seed, i);
        out[i] = {values[i], variants[i], run(variants[i], point)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(values.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace qlink
