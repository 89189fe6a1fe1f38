#pragma once

#include <cmath>
#include <string>

#include "qlink/scenario.hpp"
#include "qlink/scenario_io.hpp"

namespace qlink::test {

inline Scenario bundled(const std::string& name) {
  return load_scenario_file(std::string(QLINK_SCENARIO_DIR) + "/" + name + ".scn");
}

// No dark counts, leak, uncorrelated background or dead time: only the pair state shapes the rates.
inline Scenario noise_free(Scenario s) {
  s.idler_detector.dark_prob_per_gate = 0.0;
  s.idler_detector.holdoff_us = 0.0;
  s.signal_detector.dark_rate_hz = 0.0;
  s.uncorrelated_idler_background = false;
  s.sync.multiplexed = false;
  return s;
}

// Poisson sigma of a rate measured over `duration_s`, from the model rate.
inline double rate_sigma(double rate, double duration_s) { return std::sqrt(std::max(rate, 1.0) * duration_s) / duration_s; }

}  // namespace qlink::test
