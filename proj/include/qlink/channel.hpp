#pragma once

// Optical path from Alice's multiplexer to Bob's detector: fiber spans,
// WDM/FBG filters, sync-laser leakage into the quantum channel, dispersion
// arrival spread, the sync power budget, and polarization drift.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <variant>
#include <vector>

#include "qlink/random.hpp"
#include "qlink/units.hpp"

namespace qlink {

struct FiberSpan {
  double length_km = 0.0;
  double attenuation_db_per_km = 0.222;
  double dispersion_ps_per_nm_km = 18.0;
  bool operator==(const FiberSpan&) const = default;
};

struct Filter {
  double insertion_loss_db = 1.0;
  double isolation_db = 40.0;  // adjacent-channel isolation
  Wavelength center{1555.0};
  double flat_top_width_nm = 0.2;
  double fwhm_nm = 0.5;
  bool operator==(const Filter&) const = default;
};

using ChannelElement = std::variant<FiberSpan, Filter>;
using ChannelChain = std::vector<ChannelElement>;

struct SyncChannel {
  bool multiplexed = true;  // false: sync carried on a separate electrical cable
  Wavelength wavelength{1555.75};
  double launch_pulse_power_dbm = -3.0;
  double pulse_width_ns = 10.0;
  double offset_behind_photon_ns = 50.0;
  double idle_floor_power_dbm = -10.0;
  double fluorescence_dbm = -50.0;  // DFB fluorescence at the quantum wavelength
  std::vector<double> transmitter_filters_db{20.0, 40.0};  // FBG, WDM
  double receiver_isolation_db = 40.0;
  double mux_isolation_db = 40.0;
  bool pulse_overlaps_gate = false;
  bool allow_budget_failure = false;
  bool operator==(const SyncChannel&) const = default;
};

struct PolarizationDriftModel {
  double drift_rate_rad_per_min = 0.0;  // std of the rotation increment per minute
  double initial_misalignment_rad = 0.0;
  bool operator==(const PolarizationDriftModel&) const = default;
};

struct LinkLoss {
  double db = 0.0;
  double linear = 1.0;
};

struct SyncBudget {
  double received_dbm = 0.0;
  bool closes = false;
};

struct ChannelBudget {
  double quantum_transmittance = 1.0;
  double total_loss_db = 0.0;
  PhotonFlux leakage_flux_at_detector{};
  double arrival_spread_fwhm_ps = 0.0;
  double sync_received_power_dbm = 0.0;
  bool sync_closes = true;
};

inline constexpr double kSyncThresholdDbm = -23.0;

[[nodiscard]] inline double element_loss_db(const ChannelElement& e) {
  return std::visit(
      [](const auto& el) -> double {
        using T = std::decay_t<decltype(el)>;
        if constexpr (std::is_same_v<T, FiberSpan>)
          return el.length_km * el.attenuation_db_per_km;
        else
          return el.insertion_loss_db;
      },
      e);
}

[[nodiscard]] inline LinkLoss link_transmittance(const ChannelChain& chain) {
  double db = 0.0;
  for (const auto& e : chain) db += element_loss_db(e);
  return {db, std::pow(10.0, -db / 10.0)};
}

/// Continuous fluorescence leak plus, when it overlaps the gate, the in-band
/// part of the sync pulse. Flux is at the detector input, before efficiency.
[[nodiscard]] inline PhotonFlux leakage_flux_at_detector(const SyncChannel& sync, const ChannelChain& chain,
                                                         double detector_gate_ns,
                                                         Wavelength quantum = Wavelength{1555.0}) {
  if (!sync.multiplexed) return {0.0};
  const double tx = std::accumulate(sync.transmitter_filters_db.begin(), sync.transmitter_filters_db.end(), 0.0);
  const auto fluorescence =
      OpticalPower::from_dbm(sync.fluorescence_dbm).minus_db(tx + link_transmittance(chain).db);
  double flux = photon_flux(fluorescence, quantum).per_second;
  if (sync.pulse_overlaps_gate && detector_gate_ns > 0.0) {
    const auto pulse = OpticalPower::from_dbm(sync.launch_pulse_power_dbm)
                           .minus_db(sync.receiver_isolation_db + sync.mux_isolation_db);
    const double covered = std::min(1.0, sync.pulse_width_ns / detector_gate_ns);
    flux += covered * photon_flux(pulse, quantum).per_second;
  }
  return {flux};
}

/// Dispersion arrival-time spread (FWHM, ps) summed over all fiber spans.
[[nodiscard]] inline double arrival_time_spread_ps(const ChannelChain& chain, SpectralWidth width) {
  double ps = 0.0;
  for (const auto& e : chain)
    if (const auto* f = std::get_if<FiberSpan>(&e)) ps += dispersion_spread_ps(f->dispersion_ps_per_nm_km, width, f->length_km);
  return ps;
}

[[nodiscard]] inline SyncBudget sync_power_at_receiver(const SyncChannel& sync, const ChannelChain& chain,
                                                       double threshold_dbm = kSyncThresholdDbm) {
  const double received = sync.launch_pulse_power_dbm - link_transmittance(chain).db;
  return {received, received >= threshold_dbm};
}

/// Analyzer rotation after `elapsed_min` minutes of a Gaussian random walk.
[[nodiscard]] inline double drift_rotation(const PolarizationDriftModel& model, double elapsed_min, Rng& rng) {
  if (elapsed_min < 0.0) throw std::invalid_argument("drift_rotation: elapsed time must be non-negative");
  if (model.drift_rate_rad_per_min == 0.0 || elapsed_min == 0.0) return model.initial_misalignment_rad;
  std::normal_distribution<double> step(0.0, model.drift_rate_rad_per_min * std::sqrt(elapsed_min));
  return model.initial_misalignment_rad + step(rng);
}

/// Random walk evolved incrementally, for use inside a simulation timeline.
class PolarizationDrift {
 public:
  explicit PolarizationDrift(const PolarizationDriftModel& model)
      : rate_(model.drift_rate_rad_per_min), angle_(model.initial_misalignment_rad) {}

  [[nodiscard]] double angle() const { return angle_; }

  double advance(double minutes, Rng& rng) {
    if (rate_ > 0.0 && minutes > 0.0) {
      std::normal_distribution<double> step(0.0, rate_ * std::sqrt(minutes));
      angle_ += step(rng);
    }
    return angle_;
  }

 private:
  double rate_;
  double angle_;
};

[[nodiscard]] inline ChannelBudget channel_budget(const SyncChannel& sync, const ChannelChain& chain,
                                                  SpectralWidth idler_width, double detector_gate_ns,
                                                  double threshold_dbm = kSyncThresholdDbm,
                                                  Wavelength quantum = Wavelength{1555.0}) {
  ChannelBudget b;
  const auto loss = link_transmittance(chain);
  b.total_loss_db = loss.db;
  b.quantum_transmittance = loss.linear;
  b.leakage_flux_at_detector = leakage_flux_at_detector(sync, chain, detector_gate_ns, quantum);
  b.arrival_spread_fwhm_ps = arrival_time_spread_ps(chain, idler_width);
  if (sync.multiplexed) {
    const auto s = sync_power_at_receiver(sync, chain, threshold_dbm);
    b.sync_received_power_dbm = s.received_dbm;
    b.sync_closes = s.closes;
  } else {
    b.sync_received_power_dbm = std::numeric_limits<double>::quiet_NaN();
    b.sync_closes = true;
  }
  return b;
}

}  // namespace qlink
