#pragma once

// Physical quantities, unit conversions and closed-form beam/dispersion
// formulas used throughout the link model.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qlink {

namespace constants {
inline constexpr double planck = 6.62607015e-34;      // J s
inline constexpr double speed_of_light = 2.99792458e8; // m / s
}  // namespace constants

/// Vacuum wavelength in nanometers.
struct Wavelength {
  double nm = 0.0;
  bool operator==(const Wavelength&) const = default;
  [[nodiscard]] double meters() const { return nm * 1e-9; }
};

/// Spectral full width at half maximum, nanometers.
struct SpectralWidth {
  double fwhm_nm = 0.0;
  bool operator==(const SpectralWidth&) const = default;
};

/// Optical power stored as a dBm level. -inf dBm is "no light".
class OpticalPower {
 public:
  constexpr OpticalPower() = default;

  static constexpr OpticalPower from_dbm(double dbm) { return OpticalPower{dbm}; }
  static OpticalPower from_watts(double watts) { return OpticalPower{10.0 * std::log10(watts / 1e-3)}; }

  [[nodiscard]] constexpr double dbm() const { return dbm_; }
  [[nodiscard]] double watts() const { return 1e-3 * std::pow(10.0, dbm_ / 10.0); }

  /// Attenuate by a number of dB.
  [[nodiscard]] constexpr OpticalPower minus_db(double db) const { return OpticalPower{dbm_ - db}; }

  bool operator==(const OpticalPower&) const = default;

 private:
  constexpr explicit OpticalPower(double dbm) : dbm_(dbm) {}
  double dbm_ = 0.0;
};

/// Photons per second.
struct PhotonFlux {
  double per_second = 0.0;
  bool operator==(const PhotonFlux&) const = default;
};

struct BeamGeometry {
  double waist_diameter_um = 0.0;   // 2 w0
  double full_divergence_mrad = 0.0; // 2 theta
  double refractive_index = 1.0;
};

[[nodiscard]] inline double dbm_to_watts(OpticalPower p) { return p.watts(); }
[[nodiscard]] inline double watts_to_dbm(double watts) { return OpticalPower::from_watts(watts).dbm(); }

[[nodiscard]] inline double photon_energy_joules(Wavelength lambda) {
  return constants::planck * constants::speed_of_light / lambda.meters();
}

[[nodiscard]] inline PhotonFlux photon_flux(OpticalPower p, Wavelength lambda) {
  if (!(lambda.nm > 0.0)) throw std::invalid_argument("photon_flux: wavelength must be positive");
  return {p.watts() / photon_energy_joules(lambda)};
}

/// Optical bandwidth in THz for a wavelength width around `lambda`: c * dl / l^2.
[[nodiscard]] inline double bandwidth_to_thz(SpectralWidth width, Wavelength lambda) {
  const double l = lambda.meters();
  return constants::speed_of_light * (width.fwhm_nm * 1e-9) / (l * l) * 1e-12;
}

/// Signal bandwidth implied by equal coherence length: dl_s = dl_i (l_s / l_i)^2.
[[nodiscard]] inline SpectralWidth signal_bandwidth_from_idler(SpectralWidth idler, Wavelength signal,
                                                               Wavelength idler_lambda) {
  if (!(signal.nm > 0.0) || !(idler_lambda.nm > 0.0))
    throw std::invalid_argument("signal_bandwidth_from_idler: wavelengths must be positive");
  const double ratio = signal.nm / idler_lambda.nm;
  return {idler.fwhm_nm * ratio * ratio};
}

/// Rayleigh range in millimeters using the in-medium wavelength lambda / n.
[[nodiscard]] inline double rayleigh_range_mm(const BeamGeometry& beam, Wavelength lambda) {
  if (!(beam.waist_diameter_um > 0.0) || !(lambda.nm > 0.0))
    throw std::invalid_argument("rayleigh_range: waist and wavelength must be positive");
  const double w0_m = 0.5 * beam.waist_diameter_um * 1e-6;
  return beam.refractive_index * std::numbers::pi * w0_m * w0_m / lambda.meters() * 1e3;
}

/// Waist diameter (2 w0, micrometers) of a Gaussian beam with the given full divergence.
[[nodiscard]] inline double waist_from_divergence_um(double full_divergence_mrad, Wavelength lambda) {
  if (!(full_divergence_mrad > 0.0)) throw std::invalid_argument("waist_from_divergence: divergence must be positive");
  const double half_angle = 0.5 * full_divergence_mrad * 1e-3;
  return 2.0 * lambda.meters() / (std::numbers::pi * half_angle) * 1e6;
}

/// Chromatic-dispersion time spread in ps for cd [ps/nm/km], width, and distance [km].
[[nodiscard]] inline double dispersion_spread_ps(double cd_ps_per_nm_km, SpectralWidth width, double distance_km) {
  return cd_ps_per_nm_km * width.fwhm_nm * distance_km;
}

/// Distance [km] at which the dispersion spread equals the gate time.
[[nodiscard]] inline double max_dispersion_distance_km(double cd_ps_per_nm_km, SpectralWidth width, double gate_ns) {
  const double per_km = cd_ps_per_nm_km * width.fwhm_nm;
  if (!(per_km > 0.0)) throw std::domain_error("max_dispersion_distance: zero dispersion gives unbounded reach");
  return gate_ns * 1e3 / per_km;
}

struct EnergyConservation {
  bool passed = false;
  double residual = 0.0;  // |1/lp - 1/ls - 1/li| / (1/lp)
};

inline constexpr double kDefaultEnergyTolerance = 1e-3;

[[nodiscard]] inline EnergyConservation energy_conservation_check(Wavelength pump, Wavelength signal, Wavelength idler,
                                                                  double tolerance = kDefaultEnergyTolerance) {
  if (!(pump.nm > 0.0) || !(signal.nm > 0.0) || !(idler.nm > 0.0))
    return {false, std::numeric_limits<double>::infinity()};
  const double inv_p = 1.0 / pump.nm;
  const double residual = std::abs(inv_p - (1.0 / signal.nm + 1.0 / idler.nm)) / inv_p;
  return {residual <= tolerance, residual};
}

}  // namespace qlink
