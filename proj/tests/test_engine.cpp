#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "qlink/analysis.hpp"
#include "qlink/engine.hpp"
#include "support.hpp"

using namespace qlink;
using qlink::test::bundled;
using qlink::test::noise_free;

namespace {

const SettingCounts& find(const CountsReport& r, SignalState s, double angle) {
  for (const auto& c : r.settings)
    if (c.setting.signal == s && c.setting.idler_angle_deg == angle) return c;
  throw std::logic_error("setting not found");
}

RunSettings budget_run() { return RunSettings{RunMode::budget, 10.0, 42, {}}; }
RunSettings mc_run(double duration, std::uint64_t seed = 42) { return RunSettings{RunMode::monte_carlo, duration, seed, {}}; }

void expect_within_3_sigma(const SettingCounts& mc, const SettingCounts& b, double duration) {
  const auto check = [&](const char* what, double mc_rate, double budget_rate) {
    EXPECT_NEAR(mc_rate, budget_rate, 3.0 * qlink::test::rate_sigma(budget_rate, duration))
        << what << " at " << to_string(mc.setting.signal) << "@" << mc.setting.idler_angle_deg;
  };
  check("signal singles", mc.signal_singles_rate, b.signal_singles_rate);
  check("gates", mc.gate_rate, b.gate_rate);
  check("coincidences", mc.coincidence_rate, b.coincidence_rate);
  check("accidentals", mc.accidental_rate, b.accidental_rate);
}

}  // namespace

TEST(RunBudget, OneCrystalLocal) {
  const auto s = bundled("one_crystal_local");
  const auto r = run_budget(s, s.run);
  ASSERT_EQ(r.settings.size(), 1u);
  EXPECT_NEAR(r.settings[0].signal_singles_rate, 0.8e6, 0.02 * 0.8e6);
  EXPECT_NEAR(r.settings[0].coincidence_rate, 25e3, 0.1 * 25e3);
  EXPECT_NEAR(r.settings[0].accidental_rate, 0.9e3, 0.1 * 0.9e3);
}

TEST(RunBudget, Link27km) {
  const auto s = bundled("link_27km");
  const auto r = run_budget(s, s.run);
  const auto bases = basis_rates(r);
  ASSERT_EQ(bases.size(), 4u);
  for (const auto& b : bases) EXPECT_NEAR(b.coincidence_rate, 1.1e3, 0.25 * 1.1e3);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(RunBudget, ZeroPumpGivesZeroRates) {
  auto s = bundled("link_27km");
  s.source.pump_power_per_crystal_mw = 0.0;
  for (const auto& c : run_budget(s, s.run).settings) {
    EXPECT_EQ(c.signal_singles_rate, 0.0);
    EXPECT_EQ(c.gate_rate, 0.0);
    EXPECT_EQ(c.coincidence_rate, 0.0);
    EXPECT_EQ(c.accidental_rate, 0.0);
  }
}

TEST(RunBudget, SyncFailureZeroesGatesKeepsSingles) {
  auto s = bundled("link_27km");
  const auto ok = run_budget(s, s.run);
  s.sync.launch_pulse_power_dbm = -30.0;
  s.sync.allow_budget_failure = true;
  const auto failed = run_budget(s, s.run);
  ASSERT_EQ(failed.warnings.size(), 1u);
  for (std::size_t i = 0; i < ok.settings.size(); ++i) {
    EXPECT_EQ(failed.settings[i].signal_singles_rate, ok.settings[i].signal_singles_rate);
    EXPECT_EQ(failed.settings[i].gate_rate, 0.0);
    EXPECT_EQ(failed.settings[i].coincidence_rate, 0.0);
  }
  const auto mc = run_monte_carlo(s, mc_run(0.05));
  ASSERT_EQ(mc.warnings.size(), 1u);
  for (const auto& c : mc.settings) {
    EXPECT_GT(c.signal_singles, 0u);
    EXPECT_EQ(c.gates, 0u);
    EXPECT_EQ(c.coincidences, 0u);
  }
}

TEST(RunBudget, PeriodicInIdlerAngle) {
  const auto s = bundled("link_100m");
  for (auto st : {SignalState::H, SignalState::D}) {
    RunSettings rs = budget_run();
    for (double a = 0.0; a < 180.0; a += 7.5) {
      rs.settings.push_back({st, a});
      rs.settings.push_back({st, a + 180.0});
    }
    const auto r = run_budget(s, rs);
    for (std::size_t i = 0; i < r.settings.size(); i += 2)
      EXPECT_NEAR(r.settings[i].coincidence_rate, r.settings[i + 1].coincidence_rate,
                  1e-12 * r.settings[i].coincidence_rate);
  }
}

TEST(RunBudget, ZeroNoiseVisibilityIsMuCosPhi) {
  for (double delay : {0.0, 11.0, 5.0})
    for (double phi : {0.0, 0.28, 1.3}) {
      auto s = noise_free(bundled("link_100m"));
      s.compensators.delays_ps = {delay};
      s.source.base_phase_rad = phi;
      const double mu = interference_factor(delay, s.source.idler_coherence_time_ps, s.overlap);
      const auto merit = merit_report(s, run_budget(s, budget_run()));
      for (const auto& b : merit.bases) {
        const bool hv = b.state == SignalState::H || b.state == SignalState::V;
        EXPECT_NEAR(b.visibility, hv ? 1.0 : mu * std::abs(std::cos(phi)), 1e-9) << to_string(b.state);
      }
    }
}

TEST(RunBudget, MisalignmentScalesVisibilityByCos2Eps) {
  auto s = noise_free(bundled("link_100m"));
  s.source.base_phase_rad = 0.0;
  const double eps = 0.1;
  const auto aligned = merit_report(s, run_budget(s, budget_run()));
  s.drift.initial_misalignment_rad = eps;
  const auto rotated = merit_report(s, run_budget(s, budget_run()));
  for (std::size_t i = 0; i < aligned.bases.size(); ++i)
    if (aligned.bases[i].state == SignalState::D || aligned.bases[i].state == SignalState::A)
      EXPECT_NEAR(rotated.bases[i].visibility, std::cos(2 * eps) * aligned.bases[i].visibility, 1e-9);
}

TEST(RunBudget, ErrorFractionAndQberIdentities) {
  for (const char* n : {"link_100m", "link_27km"}) {
    const auto s = bundled(n);
    const auto r = run_budget(s, s.run);
    const auto merit = merit_report(s, r);
    const auto rates = basis_rates(r);
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const double v = merit.bases[i].visibility;
      EXPECT_NEAR(error_fraction(rates[i].coincidence_rate, rates[i].accidental_rate), (1 - v) / 2, 1e-9);
      EXPECT_NEAR(merit.bases[i].qber, (1 - v) / (1 + v), 1e-9);
    }
  }
}

TEST(RunBudget, BrightnessRoundTripsLossless) {
  auto s = noise_free(bundled("one_crystal_local"));
  s.alice_coupling_loss_db = 0.0;
  s.signal_analyzer = false;
  s.idler_analyzer = false;
  s.signal_analyzer_loss_db = 0.0;
  s.bob_analyzer_loss_db = 0.0;
  s.run.settings.clear();
  const auto r = run_budget(s, s.run);
  const auto merit = merit_report(s, r);
  EXPECT_NEAR(merit.normalized_brightness, s.source.brightness, 1e-9 * s.source.brightness);
}

TEST(RunBudget, TdcRaisesVisibilityAtEqualTrueRate) {
  auto s = bundled("link_100m");
  s.tdc.enabled = false;
  const auto off = merit_report(s, run_budget(s, budget_run()));
  s.tdc.enabled = true;
  // raise the pump until the true-coincidence rate is restored
  s.source.pump_power_per_crystal_mw /= s.tdc.true_coincidence_pass;
  const auto on = merit_report(s, run_budget(s, budget_run()));
  for (std::size_t i = 0; i < off.bases.size(); ++i) EXPECT_GT(on.bases[i].visibility, off.bases[i].visibility);
}

TEST(RunMonteCarlo, AgreesWithBudgetOneCrystal) {
  const auto s = bundled("one_crystal_local");
  const auto b = run_budget(s, s.run);
  const auto mc = run_monte_carlo(s, RunSettings{RunMode::monte_carlo, 10.0, 42, s.run.settings});
  ASSERT_EQ(mc.settings.size(), b.settings.size());
  for (std::size_t i = 0; i < b.settings.size(); ++i) expect_within_3_sigma(mc.settings[i], b.settings[i], 10.0);
}

TEST(RunMonteCarlo, AgreesWithBudgetWithDispersionAndLeak) {
  auto s = bundled("link_27km");
  s.sync.pulse_overlaps_gate = true;  // in-band pulse leak
  s.sync.receiver_isolation_db = 60.0;
  s.receiver_delay_error_ns = 1.0;      // gate partly misses the photon
  s.idler_detector.timing_jitter_ps = 800.0;
  RunSettings rs = mc_run(2.0);
  rs.settings = {{SignalState::H, 0.0}, {SignalState::D, 135.0}};
  const auto mc = run_monte_carlo(s, rs);
  rs.mode = RunMode::budget;
  const auto b = run_budget(s, rs);
  for (std::size_t i = 0; i < b.settings.size(); ++i) expect_within_3_sigma(mc.settings[i], b.settings[i], 2.0);
  EXPECT_LT(b.settings[0].coincidence_rate, run_budget(bundled("link_27km"), rs).settings[0].coincidence_rate);
}

TEST(RunMonteCarlo, AgreesWithBudgetAfterEveryGate) {
  auto s = bundled("link_100m");
  s.idler_detector.holdoff_semantics = HoldoffSemantics::after_every_gate;
  RunSettings rs = mc_run(2.0);
  rs.settings = {{SignalState::V, 90.0}, {SignalState::A, 45.0}};
  const auto mc = run_monte_carlo(s, rs);
  rs.mode = RunMode::budget;
  const auto b = run_budget(s, rs);
  for (std::size_t i = 0; i < b.settings.size(); ++i) expect_within_3_sigma(mc.settings[i], b.settings[i], 2.0);
}

TEST(RunMonteCarlo, DeterministicGivenSeed) {
  const auto s = bundled("link_27km");
  const auto a = run_monte_carlo(s, mc_run(0.1, 9));
  const auto b = run_monte_carlo(s, mc_run(0.1, 9));
  EXPECT_EQ(a, b);
  const auto c = run_monte_carlo(s, mc_run(0.1, 10));
  EXPECT_NE(a, c);
}

TEST(RunMonteCarlo, CountInvariants) {
  const auto s = bundled("link_100m");
  for (const auto& c : run_monte_carlo(s, mc_run(0.2)).settings) {
    EXPECT_LE(c.coincidences, c.gates);
    EXPECT_LE(c.accidentals, c.coincidences);
    EXPECT_LE(c.gates, c.triggers);
    EXPECT_EQ(c.triggers, c.signal_singles);
  }
}

TEST(RunMonteCarlo, HoldoffAfterEveryGateRenewal) {
  // open signal path, no idler analyzer: every trigger asks for a gate
  auto s = bundled("one_crystal_local");
  s.signal_analyzer = false;
  s.run.settings.clear();
  s.idler_detector.holdoff_semantics = HoldoffSemantics::after_every_gate;
  const double scale = 1.1e6 / run_budget(s, budget_run()).settings[0].trigger_rate;
  s.source.brightness *= scale;
  const auto b = run_budget(s, budget_run()).settings[0];
  EXPECT_NEAR(b.trigger_rate, 1.1e6, 1e-6 * 1.1e6);
  EXPECT_NEAR(b.gate_rate, 9.2e4, 0.02 * 9.2e4);
  const auto mc = run_monte_carlo(s, mc_run(2.0)).settings[0];
  EXPECT_NEAR(mc.gate_rate, 9.17e4, 0.02 * 9.17e4);
}

TEST(RunMonteCarlo, TdcKeepsEightyPercentOfPureSignal) {
  auto s = noise_free(bundled("one_crystal_local"));
  s.tdc.enabled = false;
  RunSettings rs{RunMode::monte_carlo, 2.0, 5, s.run.settings};
  const auto off = run_monte_carlo(s, rs).settings[0];
  s.tdc.enabled = true;
  const auto on = run_monte_carlo(s, rs).settings[0];
  // no dark counts or background: only idlers of neighbouring pairs land in a gate
  EXPECT_LT(on.accidentals, on.coincidences / 100);
  const double ratio = on.coincidence_rate / off.coincidence_rate;
  const double n = static_cast<double>(off.coincidences);
  const double sigma = std::sqrt(0.8 * 0.2 / n) + 0.8 * std::sqrt(2.0 / n);
  EXPECT_NEAR(ratio, 0.8, 3 * sigma);
}

TEST(RunMonteCarlo, DriftDegradesVisibility) {
  auto s = bundled("link_100m");
  s.drift.drift_rate_rad_per_min = 2.0;
  RunSettings rs = mc_run(5.0);
  rs.settings = {{SignalState::D, 45.0}, {SignalState::D, 135.0}};
  const auto r = run_monte_carlo(s, rs);
  const auto stable = run_budget(bundled("link_100m"), RunSettings{RunMode::budget, 5.0, 42, rs.settings});
  EXPECT_LT(merit_report(s, r).bases[0].visibility, merit_report(s, stable).bases[0].visibility - 0.02);
  EXPECT_EQ(r, run_monte_carlo(s, rs));
}

TEST(RunMonteCarlo, EventGuardRefuses) {
  auto s = bundled("link_27km");
  s.source.pump_power_per_crystal_mw = 400.0;
  EXPECT_THROW((void)run_monte_carlo(s, mc_run(1000.0)), EventGuardError);
  EXPECT_NO_THROW((void)run_budget(s, budget_run()));
}

TEST(VisibilityCurve, IdealDState) {
  auto s = noise_free(bundled("link_100m"));
  s.source.base_phase_rad = 0.0;
  const auto grid = angle_grid(37);
  const auto c = visibility_curve(s, SignalState::D, grid, budget_run());
  EXPECT_NEAR(c.visibility, 1.0, 1e-6);
  EXPECT_EQ(c.method, "cosine-fit");
  const auto peak = std::max_element(c.rates_hz.begin(), c.rates_hz.end()) - c.rates_hz.begin();
  EXPECT_EQ(c.angles_deg[static_cast<std::size_t>(peak)], 45.0);
  for (double r : c.rates_hz) EXPECT_GE(r, 0.0);
}

TEST(RunBudget, Link100mBasisVisibilities) {
  const auto s = bundled("link_100m");
  const auto merit = merit_report(s, run_budget(s, s.run));
  const std::pair<SignalState, double> expected[] = {
      {SignalState::H, 0.94}, {SignalState::V, 0.90}, {SignalState::D, 0.87}, {SignalState::A, 0.89}};
  ASSERT_EQ(merit.bases.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(merit.bases[i].state, expected[i].first);
    EXPECT_NEAR(merit.bases[i].visibility, expected[i].second, 0.03) << to_string(expected[i].first);
  }
  ASSERT_TRUE(merit.qber.has_value());
  EXPECT_NEAR(*merit.qber, 0.05, 0.02);
  EXPECT_TRUE(merit.secure);
}

TEST(VisibilityCurve, Link27kmFittedVisibilities) {
  const auto s = bundled("link_27km");
  const auto grid = angle_grid(37);
  const std::pair<SignalState, double> expected[] = {
      {SignalState::H, 0.85}, {SignalState::V, 0.85}, {SignalState::D, 0.83}, {SignalState::A, 0.85}};
  for (const auto& [st, v] : expected)
    EXPECT_NEAR(visibility_curve(s, st, grid, budget_run()).visibility, v, 0.03) << to_string(st);
}

TEST(VisibilityCurve, RejectsBadGrid) {
  const auto s = bundled("link_100m");
  const std::vector<double> unsorted{0, 20, 10, 30, 40, 50, 60, 180};
  EXPECT_THROW((void)visibility_curve(s, SignalState::D, unsorted, budget_run()), std::invalid_argument);
  const std::vector<double> narrow{0, 10, 20, 30, 40, 50, 60, 70};
  EXPECT_THROW((void)visibility_curve(s, SignalState::D, narrow, budget_run()), std::invalid_argument);
}

TEST(VisibilityCurve, MonteCarloPeriodWithinNoise) {
  const auto s = bundled("link_100m");
  RunSettings rs = mc_run(0.5);
  const std::vector<double> grid{0, 22.5, 45, 67.5, 90, 112.5, 135, 157.5, 180, 202.5, 225, 247.5, 270, 292.5, 315, 337.5};
  const auto c = visibility_curve(s, SignalState::D, grid, rs);
  for (std::size_t i = 0; i + 8 < grid.size(); ++i) {
    const double sigma = std::sqrt((c.rates_hz[i] + c.rates_hz[i + 8]) * 0.5) / 0.5;
    EXPECT_NEAR(c.rates_hz[i], c.rates_hz[i + 8], 3 * sigma);
  }
}

TEST(Sweep, FiberLengthMonotone) {
  const auto s = bundled("link_27km");
  std::vector<double> lengths;
  for (double l = 0.0; l <= 100.0; l += 10.0) lengths.push_back(l);
  auto long_sync = s;
  long_sync.sync.launch_pulse_power_dbm = 20.0;  // keep the sync budget closed at 100 km
  const auto pts = sweep(long_sync, "channel[1].length_km", lengths, budget_run());
  ASSERT_EQ(pts.size(), lengths.size());
  for (std::size_t i = 1; i < pts.size(); ++i)
    EXPECT_LT(basis_rates(pts[i].report)[0].coincidence_rate, basis_rates(pts[i - 1].report)[0].coincidence_rate);
}

TEST(Sweep, CoincidencesLinearInPumpWithoutNoise) {
  const auto s = noise_free(bundled("link_27km"));
  const std::vector<double> pumps{0.5, 1.0, 2.0, 4.0, 8.0};
  const auto pts = sweep(s, "source.pump_power_per_crystal_mw", pumps, budget_run());
  const double per_mw = pts[1].report.settings[0].coincidence_rate;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (const auto& c : pts[i].report.settings) {
      const auto& ref = find(pts[1].report, c.setting.signal, c.setting.idler_angle_deg);
      EXPECT_NEAR(c.coincidence_rate, pumps[i] * ref.coincidence_rate, 1e-9 * pumps[i] * ref.coincidence_rate);
    }
  EXPECT_GT(per_mw, 0.0);
}

TEST(Sweep, TemperatureFollowsPhaseModel) {
  const auto s = noise_free(bundled("link_100m"));
  std::vector<double> temps;
  for (double t = 0.0; t <= 0.2 + 1e-12; t += 0.01) temps.push_back(t);
  const auto pts = sweep(s, "source.temperature_offset_c", temps, budget_run());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto merit = merit_report(pts[i].scenario, pts[i].report);
    const double expected = std::abs(std::cos(s.source.base_phase_rad + 10 * std::numbers::pi * temps[i]));
    for (const auto& b : merit.bases)
      if (b.state == SignalState::D || b.state == SignalState::A) EXPECT_NEAR(b.visibility, expected, 1e-9);
  }
}

TEST(Sweep, UnknownPathNamesField) {
  const auto s = bundled("link_27km");
  const std::vector<double> v{1.0};
  try {
    (void)sweep(s, "source.pump_mw", v, budget_run());
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("source.pump_mw"), std::string::npos);
  }
}

TEST(Sweep, ParallelMatchesSerial) {
  const auto s = bundled("link_27km");
  const std::vector<double> lengths{5, 10, 15, 20, 25, 30};
  RunSettings rs = mc_run(0.05, 1234);
  rs.settings = {{SignalState::H, 0.0}, {SignalState::H, 90.0}};
  const auto serial = sweep(s, "channel[1].length_km", lengths, rs, 1);
  const auto parallel = sweep(s, "channel[1].length_km", lengths, rs, 4);
  EXPECT_EQ(serial, parallel);
  // per-point seeds depend only on (master, index)
  const auto single = sweep(s, "channel[1].length_km", std::vector<double>{5, 10, 15}, rs, 3);
  for (std::size_t i = 0; i < single.size(); ++i) EXPECT_EQ(single[i].report, serial[i].report);
}
