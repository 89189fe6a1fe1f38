#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qlink/detection.hpp"

using namespace qlink;

namespace {

// Brute-force renewal oracle: Poisson triggers, non-paralyzable dead time after
// each accepted gate. Returns accepted gates per second.
double dead_time_oracle(double rate, double tau_s, double duration_s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  double t = 0.0, dead_until = -1.0;
  std::uint64_t accepted = 0;
  while ((t += gap(rng)) < duration_s) {
    if (t < dead_until) continue;
    ++accepted;
    dead_until = t + tau_s;
  }
  return static_cast<double>(accepted) / duration_s;
}

// After-detection oracle: each accepted gate avalanches with probability a.
double after_detection_oracle(double rate, double tau_s, double a, double duration_s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  std::bernoulli_distribution click(a);
  double t = 0.0, dead_until = -1.0;
  std::uint64_t accepted = 0;
  while ((t += gap(rng)) < duration_s) {
    if (t < dead_until) continue;
    ++accepted;
    if (click(rng)) dead_until = t + tau_s;
  }
  return static_cast<double>(accepted) / duration_s;
}

GatedDetector every_gate(double holdoff_us) {
  GatedDetector d;
  d.holdoff_us = holdoff_us;
  d.holdoff_semantics = HoldoffSemantics::after_every_gate;
  return d;
}

}  // namespace

TEST(DetectionTrial, Examples) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(detection_trial(1.0, 1.0, rng));
    EXPECT_FALSE(detection_trial(0.0, 1.0, rng));
  }
}

TEST(DetectionTrial, BinomialRate) {
  Rng rng(2);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += detection_trial(0.6, 0.18, rng);
  const double p = 0.108, sigma = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(static_cast<double>(hits) / n, p, 3 * sigma);
}

TEST(EffectiveGateRate, AfterEveryGateExample) {
  const double r = effective_gate_rate(1.1e6, every_gate(10.0), 0.0);
  EXPECT_NEAR(r, 9.17e4, 0.02 * 9.17e4);
  // frozen from dead_time_oracle(1.1e6, 10e-6, 2 s)
  EXPECT_NEAR(r, dead_time_oracle(1.1e6, 10e-6, 2.0, 17), 0.02 * r);
}

TEST(EffectiveGateRate, AfterDetectionExample) {
  GatedDetector d;
  const double r = effective_gate_rate(0.8e6, d, 25e3);
  EXPECT_NEAR(1.0 - r / 0.8e6, 0.25, 1e-12);
  EXPECT_EQ(effective_gate_rate(1e6, d, 1e6), 0.0);
}

TEST(EffectiveGateRate, ZeroHoldoffIsIdentity) {
  EXPECT_EQ(effective_gate_rate(1.1e6, every_gate(0.0), 0.0), 1.1e6);
  GatedDetector d;
  d.holdoff_us = 0.0;
  EXPECT_EQ(effective_gate_rate(1.1e6, d, 3e4), 1.1e6);
}

TEST(EffectiveGateRate, MatchesRenewalOracleOverRange) {
  int seed = 0;
  for (double x : {0.01, 0.1, 0.5, 1.0, 3.0, 8.0, 20.0}) {
    const double tau = 10e-6, rate = x / tau;
    const double duration = std::max(0.5, 20000.0 / rate);
    const double model = effective_gate_rate(rate, every_gate(10.0), 0.0);
    EXPECT_NEAR(dead_time_oracle(rate, tau, duration, 100 + seed++), model, 0.02 * model) << "R tau = " << x;
  }
}

TEST(OpenGateRate, MatchesAfterDetectionOracle) {
  GatedDetector d;
  for (double a : {0.0, 0.01, 0.03, 0.2}) {
    const double model = open_gate_rate(0.8e6, d, a);
    EXPECT_NEAR(after_detection_oracle(0.8e6, 10e-6, a, 1.0, 7), model, 0.01 * model) << "a = " << a;
  }
  EXPECT_EQ(open_gate_rate(1.1e6, every_gate(10.0), 0.5), effective_gate_rate(1.1e6, every_gate(10.0), 0.0));
}

TEST(AccidentalProbability, Examples) {
  GatedDetector d;
  d.dark_prob_per_gate = 1.125e-3;
  EXPECT_NEAR(accidental_probability_per_gate(d, {0.0}, 2.5) * 0.8e6, 0.9e3, 1e-9);
  d.dark_prob_per_gate = 0.0;
  EXPECT_EQ(accidental_probability_per_gate(d, {0.0}, 2.5), 0.0);
  d.dark_prob_per_gate = 1e-3;
  const double full = accidental_probability_per_gate(d, {2e5}, 2.5);
  const double tdc = accidental_probability_per_gate(d, {2e5}, 1.5);
  EXPECT_NEAR(tdc / full, 0.6, 1e-12);
  EXPECT_THROW((void)accidental_probability_per_gate(d, {0.0}, 0.0), std::invalid_argument);
}

TEST(AccidentalProbability, LinearInFluxAndWindow) {
  GatedDetector d;
  d.dark_prob_per_gate = 0.0;
  const double base = accidental_probability_per_gate(d, {1e4}, 1.0);
  for (double k : {2.0, 3.5, 10.0}) {
    EXPECT_NEAR(accidental_probability_per_gate(d, {k * 1e4}, 1.0), k * base, 1e-12 * k * base);
    EXPECT_NEAR(accidental_probability_per_gate(d, {1e4}, k * 0.2), 0.2 * k * base, 1e-12 * k * base);
  }
}

TEST(TdcFilter, DisabledIsIdentity) {
  Rng rng(3);
  const TimeDiscriminator off;
  for (bool c : {false, true})
    for (bool a : {false, true}) EXPECT_EQ(tdc_filter(c, a, off, 2.5, rng), c || a);
}

TEST(TdcFilter, KeepsEightyPercentOfTrueCoincidences) {
  Rng rng(4);
  TimeDiscriminator tdc;
  tdc.enabled = true;
  const int n = 1000000;
  int kept = 0;
  for (int i = 0; i < n; ++i) kept += tdc_filter(true, false, tdc, 2.5, rng);
  const double sigma = std::sqrt(n * 0.8 * 0.2);
  EXPECT_NEAR(kept, 8.0e5, 3 * sigma);
}

TEST(TdcFilter, AccidentalsReducedByWindowRatio) {
  Rng rng(5);
  TimeDiscriminator tdc;
  tdc.enabled = true;
  const int n = 1000000;
  int kept = 0;
  for (int i = 0; i < n; ++i) kept += tdc_filter(false, true, tdc, 2.5, rng);
  EXPECT_NEAR(static_cast<double>(kept) / n, 0.6, 3 * std::sqrt(0.24 / n));
}

TEST(TdcFilter, ReproducibleGivenSeed) {
  TimeDiscriminator tdc;
  tdc.enabled = true;
  Rng a(77), b(77);
  for (int i = 0; i < 10000; ++i) EXPECT_EQ(tdc_filter(i % 3 == 0, i % 2 == 0, tdc, 2.5, a), tdc_filter(i % 3 == 0, i % 2 == 0, tdc, 2.5, b));
}

TEST(CountingWindow, FollowsTdc) {
  GatedDetector d;
  TimeDiscriminator t;
  EXPECT_EQ(counting_window_ns(d, t), 2.5);
  t.enabled = true;
  EXPECT_EQ(counting_window_ns(d, t), 1.5);
}
