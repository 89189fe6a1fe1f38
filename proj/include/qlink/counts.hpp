#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qlink/scenario.hpp"

namespace qlink {

/// Rates (Hz) for one analyzer setting. Counts are filled in Monte Carlo mode only.
struct SettingCounts {
  AnalyzerSetting setting;
  double signal_singles_rate = 0.0;
  double trigger_rate = 0.0;
  double gate_rate = 0.0;
  double coincidence_rate = 0.0;
  double accidental_rate = 0.0;

  std::uint64_t signal_singles = 0;
  std::uint64_t triggers = 0;
  std::uint64_t gates = 0;
  std::uint64_t coincidences = 0;
  std::uint64_t accidentals = 0;

  bool operator==(const SettingCounts&) const = default;
};

struct CountsReport {
  RunMode mode = RunMode::budget;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  std::vector<SettingCounts> settings;
  std::vector<std::string> warnings;
  bool operator==(const CountsReport&) const = default;
};

struct VisibilityCurve {
  SignalState signal = SignalState::H;
  std::vector<double> angles_deg;  // idler analyzer polarization angle
  std::vector<double> rates_hz;
  double visibility = 0.0;
  std::string method;  // "cosine-fit" | "min-max"
  bool operator==(const VisibilityCurve&) const = default;
};

}  // namespace qlink
