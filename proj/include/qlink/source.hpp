#pragma once

// Two-crystal SPDC source: in-fiber pair flux, the polarization pair state
// (phase and interference factor), group-delay compensation and the
// temperature dependence of the phase.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qlink/units.hpp"

namespace qlink {

enum class CrystalPolarization { V, H };

struct TwoCrystalSource {
  double brightness = 1.2e6;             // in-fiber pairs / (s THz mW)
  double pump_power_per_crystal_mw = 4.0;
  int crystals_pumped = 2;               // 1 or 2
  CrystalPolarization single_crystal = CrystalPolarization::V;  // used when crystals_pumped == 1
  double crystal_length_mm = 50.0;
  Wavelength pump{532.0};
  Wavelength signal{809.0};
  Wavelength idler{1555.0};
  SpectralWidth idler_bandwidth{0.5};
  double idler_coherence_time_ps = 16.0;
  double base_phase_rad = 0.0;
  double phase_temp_slope_rad_per_c = 10.0 * std::numbers::pi;
  double temperature_offset_c = 0.0;
  double weight_v = 0.5;                 // share of pair flux from the V crystal when both are pumped

  bool operator==(const TwoCrystalSource&) const = default;
};

/// Signed group delays of idler V relative to idler H, ps (positive = V delayed).
struct CompensatorStack {
  std::vector<double> delays_ps;
  bool operator==(const CompensatorStack&) const = default;
};

enum class OverlapKind { triangular, gaussian };

/// Temporal-overlap model mapping residual delay to the interference factor.
/// A width of 0 selects the calibrated default derived from the coherence time.
struct OverlapModel {
  OverlapKind kind = OverlapKind::triangular;
  double width_ps = 0.0;
  bool operator==(const OverlapModel&) const = default;
};

struct PairState {
  double phase_rad = 0.0;
  double interference = 1.0;  // mu in [0, 1]
  double weight_v = 0.5;      // |VV> population
  bool operator==(const PairState&) const = default;
};

// The widths below put mu(11 ps) = 0.25 at a 16 ps coherence time.
inline constexpr double kTriangularWidthPerCoherence = (44.0 / 3.0) / 16.0;
inline constexpr double kGaussianWidthPerCoherence = 11.0 * std::numbers::sqrt2 / 16.0;

[[nodiscard]] inline double overlap_width_ps(const OverlapModel& model, double coherence_time_ps) {
  if (model.width_ps > 0.0) return model.width_ps;
  return coherence_time_ps * (model.kind == OverlapKind::triangular ? kTriangularWidthPerCoherence
                                                                     : kGaussianWidthPerCoherence);
}

/// In-fiber pair flux before detection: brightness * P * crystals * bandwidth[THz].
[[nodiscard]] inline PhotonFlux pair_flux_in_fiber(const TwoCrystalSource& src, int crystals_pumped) {
  if (crystals_pumped != 1 && crystals_pumped != 2)
    throw std::invalid_argument("pair_flux_in_fiber: crystals_pumped must be 1 or 2");
  return {src.brightness * src.pump_power_per_crystal_mw * crystals_pumped *
          bandwidth_to_thz(src.idler_bandwidth, src.idler)};
}

[[nodiscard]] inline PhotonFlux pair_flux_in_fiber(const TwoCrystalSource& src) {
  return pair_flux_in_fiber(src, src.crystals_pumped);
}

[[nodiscard]] inline double net_group_delay_ps(const CompensatorStack& stack) {
  return std::accumulate(stack.delays_ps.begin(), stack.delays_ps.end(), 0.0);
}

[[nodiscard]] inline double interference_factor(double delay_ps, double coherence_time_ps,
                                                const OverlapModel& model = {}) {
  if (!(coherence_time_ps > 0.0)) throw std::invalid_argument("interference_factor: coherence time must be positive");
  const double x = std::abs(delay_ps) / overlap_width_ps(model, coherence_time_ps);
  switch (model.kind) {
    case OverlapKind::triangular:
      return std::max(0.0, 1.0 - x);
    case OverlapKind::gaussian:
      return std::exp(-4.0 * std::numbers::ln2 * x * x);
  }
  return 0.0;
}

[[nodiscard]] inline double phase_at(const TwoCrystalSource& src, double temperature_offset_c) {
  return src.base_phase_rad + src.phase_temp_slope_rad_per_c * temperature_offset_c;
}

/// Joint probability that the signal passes a linear analyzer at `theta_a` and the
/// idler passes one at `theta_b` (radians from H), for the partially coherent state
///   rho = mu |Phi><Phi| + (1 - mu) (w_V |VV><VV| + w_H |HH><HH|).
[[nodiscard]] inline double coincidence_probability(double theta_a, double theta_b, const PairState& state) {
  const double sa = std::sin(theta_a), ca = std::cos(theta_a);
  const double sb = std::sin(theta_b), cb = std::cos(theta_b);
  const double wv = state.weight_v, wh = 1.0 - state.weight_v;
  return wv * sa * sa * sb * sb + wh * ca * ca * cb * cb +
         2.0 * state.interference * std::sqrt(wv * wh) * std::cos(state.phase_rad) * sa * ca * sb * cb;
}

/// Probability that the signal alone passes an analyzer at `theta_a`.
[[nodiscard]] inline double signal_marginal(double theta_a, const PairState& state) {
  const double s = std::sin(theta_a), c = std::cos(theta_a);
  return state.weight_v * s * s + (1.0 - state.weight_v) * c * c;
}

/// Probability that the idler alone passes an analyzer at `theta_b`.
[[nodiscard]] inline double idler_marginal(double theta_b, const PairState& state) {
  return signal_marginal(theta_b, state);
}

struct LengthScaling {
  double rate_factor = 1.0;
  double bandwidth_factor = 1.0;
};

/// Optimal-focusing scaling: pair rate ~ sqrt(L), bandwidth ~ 1/L.
[[nodiscard]] inline LengthScaling crystal_length_scaling(double length_ratio) {
  if (!(length_ratio > 0.0)) throw std::invalid_argument("crystal_length_scaling: ratio must be positive");
  return {std::sqrt(length_ratio), 1.0 / length_ratio};
}

/// Pair state produced by a source and its compensator stack.
[[nodiscard]] inline PairState pair_state(const TwoCrystalSource& src, const CompensatorStack& stack,
                                          const OverlapModel& model) {
  PairState st;
  st.phase_rad = phase_at(src, src.temperature_offset_c);
  if (src.crystals_pumped == 1) {
    st.weight_v = src.single_crystal == CrystalPolarization::V ? 1.0 : 0.0;
    st.interference = 0.0;
  } else {
    st.weight_v = src.weight_v;
    st.interference = interference_factor(net_group_delay_ps(stack), src.idler_coherence_time_ps, model);
  }
  return st;
}

}  // namespace qlink
