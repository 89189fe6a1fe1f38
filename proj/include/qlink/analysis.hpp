#pragma once

// Figures of merit: visibility, QBER, the security verdict, conditional
// detection probability and normalised source brightness.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlink/counts.hpp"
#include "qlink/scenario.hpp"
#include "qlink/units.hpp"

namespace qlink {

inline constexpr double kQberSecurityThreshold = 0.11;

/// Raw visibility (R_c - R_a) / (R_c + R_a).
[[nodiscard]] inline double visibility(double coincidences, double accidentals) {
  const double sum = coincidences + accidentals;
  if (sum == 0.0) throw std::domain_error("visibility: R_c + R_a must be non-zero");
  return (coincidences - accidentals) / sum;
}

/// Error fraction R_a / (R_c + R_a) = (1 - V) / 2.
[[nodiscard]] inline double error_fraction(double coincidences, double accidentals) {
  const double sum = coincidences + accidentals;
  if (sum == 0.0) throw std::domain_error("error_fraction: R_c + R_a must be non-zero");
  return accidentals / sum;
}

struct CurveFit {
  double visibility = 0.0;
  double offset = 0.0;     // a
  double amplitude = 0.0;  // b
  double phase_deg = 0.0;  // theta_0
  std::string method;
};

namespace detail {

// Solves the 3x3 system m x = r by Gaussian elimination; nullopt if singular.
inline std::optional<std::array<double, 3>> solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> r) {
  double scale = 0.0;
  for (const auto& row : m)
    for (double x : row) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return std::nullopt;
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int i = col + 1; i < 3; ++i)
      if (std::abs(m[i][col]) > std::abs(m[pivot][col])) pivot = i;
    if (std::abs(m[pivot][col]) < 1e-10 * scale) return std::nullopt;
    std::swap(m[pivot], m[col]);
    std::swap(r[pivot], r[col]);
    for (int i = col + 1; i < 3; ++i) {
      const double f = m[i][col] / m[col][col];
      for (int j = col; j < 3; ++j) m[i][j] -= f * m[col][j];
      r[i] -= f * r[col];
    }
  }
  std::array<double, 3> x{};
  for (int i = 2; i >= 0; --i) {
    double acc = r[i];
    for (int j = i + 1; j < 3; ++j) acc -= m[i][j] * x[j];
    x[i] = acc / m[i][i];
  }
  return x;
}

}  // namespace detail

/// Least-squares fit of a + b cos(2(theta - theta0)); V = b / a. Falls back to
/// (max - min) / (max + min) when the fit is ill-conditioned.
[[nodiscard]] inline CurveFit fit_visibility(std::span<const double> angles_deg, std::span<const double> rates) {
  if (angles_deg.size() != rates.size()) throw std::invalid_argument("fit_visibility: size mismatch");
  if (angles_deg.size() < 8) throw std::invalid_argument("fit_visibility: need at least 8 grid points");
  const auto [lo, hi] = std::minmax_element(angles_deg.begin(), angles_deg.end());
  if (*hi - *lo < 180.0 - 1e-9) throw std::invalid_argument("fit_visibility: grid must span at least 180 degrees");

  std::array<std::array<double, 3>, 3> m{};
  std::array<double, 3> r{};
  for (std::size_t k = 0; k < angles_deg.size(); ++k) {
    const double t = 2.0 * deg_to_rad(angles_deg[k]);
    const std::array<double, 3> basis{1.0, std::cos(t), std::sin(t)};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += basis[i] * basis[j];
      r[i] += basis[i] * rates[k];
    }
  }
  CurveFit fit;
  if (const auto x = detail::solve3(m, r); x && (*x)[0] > 0.0) {
    fit.offset = (*x)[0];
    fit.amplitude = std::hypot((*x)[1], (*x)[2]);
    fit.phase_deg = 0.5 * std::atan2((*x)[2], (*x)[1]) * 180.0 / std::numbers::pi;
    fit.visibility = fit.amplitude / fit.offset;
    fit.method = "cosine-fit";
    return fit;
  }
  const auto [mn, mx] = std::minmax_element(rates.begin(), rates.end());
  fit.offset = 0.5 * (*mx + *mn);
  fit.amplitude = 0.5 * (*mx - *mn);
  fit.visibility = (*mx + *mn) > 0.0 ? (*mx - *mn) / (*mx + *mn) : 0.0;
  fit.method = "min-max";
  return fit;
}

[[nodiscard]] inline double visibility_from_curve(const VisibilityCurve& curve) {
  return fit_visibility(curve.angles_deg, curve.rates_hz).visibility;
}

/// Per-basis rates. R_c is the larger and R_a the smaller coincidence rate of the
/// parallel/orthogonal pair; with a single setting R_a is the accidentals estimate.
struct BasisRates {
  SignalState state = SignalState::H;
  double coincidence_rate = 0.0;
  double accidental_rate = 0.0;
  double singles_rate = 0.0;
  bool from_orthogonal = false;
};

[[nodiscard]] inline std::vector<BasisRates> basis_rates(const CountsReport& report) {
  std::vector<BasisRates> out;
  std::vector<const SettingCounts*> seen;
  for (const auto& sc : report.settings) {
    const auto it = std::find_if(out.begin(), out.end(), [&](const BasisRates& b) { return b.state == sc.setting.signal; });
    if (it == out.end()) {
      out.push_back({sc.setting.signal, sc.coincidence_rate, sc.accidental_rate, sc.signal_singles_rate, false});
      seen.push_back(&sc);
      continue;
    }
    auto& b = *it;
    if (b.from_orthogonal) continue;
    const auto* first = seen[static_cast<std::size_t>(it - out.begin())];
    const double delta = std::remainder(sc.setting.idler_angle_deg - first->setting.idler_angle_deg, 180.0);
    if (std::abs(std::abs(delta) - 90.0) > 1e-9) continue;
    b.coincidence_rate = std::max(first->coincidence_rate, sc.coincidence_rate);
    b.accidental_rate = std::min(first->coincidence_rate, sc.coincidence_rate);
    b.singles_rate = first->coincidence_rate >= sc.coincidence_rate ? first->signal_singles_rate : sc.signal_singles_rate;
    b.from_orthogonal = true;
  }
  return out;
}

/// Basis-averaged R_a / R_c.
[[nodiscard]] inline double qber(const CountsReport& report) {
  const auto bases = basis_rates(report);
  if (bases.empty()) throw std::domain_error("qber: report has no analyzer settings");
  double sum = 0.0;
  for (const auto& b : bases) {
    if (!(b.coincidence_rate > 0.0))
      throw std::domain_error("qber: basis " + std::string(to_string(b.state)) + " has zero coincidence rate");
    sum += b.accidental_rate / b.coincidence_rate;
  }
  return sum / static_cast<double>(bases.size());
}

[[nodiscard]] inline bool is_secure(double qber_value) {
  if (!(qber_value >= 0.0 && qber_value <= 1.0)) throw std::domain_error("is_secure: QBER must lie in [0, 1]");
  return qber_value < kQberSecurityThreshold;
}

struct ConditionalDetection {
  double raw = 0.0;
  double corrected = 0.0;
};

[[nodiscard]] inline ConditionalDetection conditional_detection(double coincidences, double singles, double idler_efficiency) {
  if (!(singles > 0.0)) throw std::domain_error("conditional_detection: R_s must be positive");
  if (!(idler_efficiency > 0.0 && idler_efficiency <= 1.0))
    throw std::domain_error("conditional_detection: efficiency must be in (0, 1]");
  const double raw = coincidences / singles;
  return {raw, raw / idler_efficiency};
}

/// In-fiber pairs per (s THz mW) inferred from a coincidence rate.
[[nodiscard]] inline double normalized_brightness(double coincidences, double signal_efficiency, double idler_efficiency,
                                                  double pump_mw, SpectralWidth idler_width, Wavelength idler) {
  const double denom = signal_efficiency * idler_efficiency * pump_mw * bandwidth_to_thz(idler_width, idler);
  if (!(denom > 0.0)) throw std::domain_error("normalized_brightness: denominators must be positive");
  return coincidences / denom;
}

struct BasisVisibility {
  SignalState state = SignalState::H;
  double visibility = 0.0;
  double qber = 0.0;  // R_a / R_c for this basis
};

struct MeritReport {
  std::vector<BasisVisibility> bases;
  std::optional<double> qber;  // empty when some basis has no coincidences
  bool secure = false;
  ConditionalDetection conditional;
  double normalized_brightness = 0.0;
};

[[nodiscard]] inline MeritReport merit_report(const Scenario& s, const CountsReport& report) {
  MeritReport m;
  const auto bases = basis_rates(report);
  double rc_sum = 0.0, cond_sum = 0.0;
  std::size_t cond_n = 0;
  for (const auto& b : bases) {
    const double sum = b.coincidence_rate + b.accidental_rate;
    BasisVisibility bv{b.state, sum > 0.0 ? visibility(b.coincidence_rate, b.accidental_rate) : 0.0,
                       b.coincidence_rate > 0.0 ? b.accidental_rate / b.coincidence_rate : 1.0};
    m.bases.push_back(bv);
    rc_sum += b.coincidence_rate;
    if (b.singles_rate > 0.0) {
      cond_sum += b.coincidence_rate / b.singles_rate;
      ++cond_n;
    }
  }
  try {
    m.qber = qber(report);
    m.secure = *m.qber <= 1.0 && is_secure(*m.qber);
  } catch (const std::domain_error&) {
    m.qber.reset();
    m.secure = false;
  }
  if (cond_n > 0) {
    const double raw = cond_sum / static_cast<double>(cond_n);
    m.conditional = {raw, s.idler_detector.efficiency > 0.0 ? raw / s.idler_detector.efficiency : 0.0};
  }
  const double pump_total = s.source.pump_power_per_crystal_mw * s.source.crystals_pumped;
  if (!bases.empty() && pump_total > 0.0 && s.signal_detector.efficiency > 0.0 && s.idler_detector.efficiency > 0.0)
    m.normalized_brightness = normalized_brightness(rc_sum / static_cast<double>(bases.size()),
                                                    s.signal_detector.efficiency, s.idler_detector.efficiency,
                                                    pump_total, s.source.idler_bandwidth, s.source.idler);
  return m;
}

}  // namespace qlink
