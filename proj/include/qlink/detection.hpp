#pragma once

// Detectors and coincidence electronics: free-running Si APD, gated InGaAs
// APD with hold-off, accidental-count probability, the time-discriminator
// circuit (TDC) and the sync receiver threshold.

#include <algorithm>
#include <stdexcept>

#include "qlink/random.hpp"
#include "qlink/units.hpp"

namespace qlink {

struct FreeRunningDetector {
  double efficiency = 0.60;
  double dark_rate_hz = 0.0;
  double output_pulse_width_ns = 10.0;
  bool operator==(const FreeRunningDetector&) const = default;
};

enum class HoldoffSemantics {
  after_detection,   // dead time follows gates that produced an avalanche
  after_every_gate,  // dead time follows every opened gate
};

struct GatedDetector {
  double efficiency = 0.18;
  double gate_width_ns = 2.5;
  double holdoff_us = 10.0;
  HoldoffSemantics holdoff_semantics = HoldoffSemantics::after_detection;
  double dark_prob_per_gate = 1.1e-3;
  double timing_jitter_ps = 0.0;  // FWHM, added in quadrature to dispersion spread
  bool operator==(const GatedDetector&) const = default;
};

struct TimeDiscriminator {
  bool enabled = false;
  double overlap_window_ns = 1.5;
  double true_coincidence_pass = 0.8;
  bool operator==(const TimeDiscriminator&) const = default;
};

struct SyncReceiver {
  double threshold_dbm = -23.0;
  double latency_ns = 0.0;
  bool operator==(const SyncReceiver&) const = default;
};

/// Bernoulli thinning by efficiency and transmittance.
[[nodiscard]] inline bool detection_trial(double efficiency, double transmittance, Rng& rng) {
  return uniform01(rng) < efficiency * transmittance;
}

/// Rate of gates actually opened by `trigger_rate` triggers under hold-off.
/// `detection_rate` is the avalanche rate used by after-detection semantics.
[[nodiscard]] inline double effective_gate_rate(double trigger_rate, const GatedDetector& det, double detection_rate) {
  const double tau = det.holdoff_us * 1e-6;
  if (tau == 0.0) return trigger_rate;
  if (det.holdoff_semantics == HoldoffSemantics::after_every_gate) return trigger_rate / (1.0 + trigger_rate * tau);
  return trigger_rate * std::max(0.0, 1.0 - detection_rate * tau);
}

/// Gate rate for Poisson triggers where each opened gate avalanches with
/// probability `avalanche_prob` (self-consistent form of after-detection hold-off).
[[nodiscard]] inline double open_gate_rate(double trigger_rate, const GatedDetector& det, double avalanche_prob) {
  const double tau = det.holdoff_us * 1e-6;
  if (det.holdoff_semantics == HoldoffSemantics::after_every_gate) return trigger_rate / (1.0 + trigger_rate * tau);
  return trigger_rate / (1.0 + trigger_rate * avalanche_prob * tau);
}

/// Linearised accidental probability in a window of `window_ns` (<= gate width).
/// `background` is the photon flux reaching the detector before efficiency.
[[nodiscard]] inline double accidental_probability_per_gate(const GatedDetector& det, PhotonFlux background,
                                                            double window_ns) {
  if (!(window_ns > 0.0)) throw std::invalid_argument("accidental_probability_per_gate: window must be positive");
  return det.dark_prob_per_gate * (window_ns / det.gate_width_ns) +
         background.per_second * det.efficiency * window_ns * 1e-9;
}

/// Statistical TDC: true coincidences survive with the pass probability, an
/// accidental survives if it falls inside the overlap window of a
/// `gate_width_ns` gate (uniform arrival). Identity when disabled.
[[nodiscard]] inline bool tdc_filter(bool coincidence, bool accidental, const TimeDiscriminator& tdc,
                                     double gate_width_ns, Rng& rng) {
  if (!tdc.enabled) return coincidence || accidental;
  if (coincidence && uniform01(rng) < tdc.true_coincidence_pass) return true;
  if (accidental) return uniform01(rng) < tdc.overlap_window_ns / gate_width_ns;
  return false;
}

[[nodiscard]] inline bool sync_gate_check(double received_power_dbm, const SyncReceiver& rx) {
  return received_power_dbm >= rx.threshold_dbm;
}

/// Effective counting window of the idler detector (TDC overlap when enabled).
[[nodiscard]] inline double counting_window_ns(const GatedDetector& det, const TimeDiscriminator& tdc) {
  return tdc.enabled ? tdc.overlap_window_ns : det.gate_width_ns;
}

}  // namespace qlink
