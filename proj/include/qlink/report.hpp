#pragma once

// JSON and CSV output. Field order is fixed and numbers use the shortest
// round-trip form, so identical runs produce byte-identical files.

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qlink/analysis.hpp"
#include "qlink/counts.hpp"
#include "qlink/engine.hpp"
#include "qlink/scenario.hpp"
#include "qlink/scenario_io.hpp"

namespace qlink {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

using Json = nlohmann::ordered_json;

namespace report_detail {

inline Json header(std::string_view kind, const Scenario& s, RunMode mode, std::uint64_t seed) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  j["tool_version"] = kToolVersion;
  j["scenario"] = {{"name", s.name}, {"hash", scenario_hash(s)}};
  j["mode"] = to_string(mode);
  j["seed"] = seed;
  return j;
}

inline Json number_or_null(std::optional<double> x) { return x ? Json(*x) : Json(nullptr); }

}  // namespace report_detail

[[nodiscard]] inline Json setting_json(const SettingCounts& c, RunMode mode) {
  Json j;
  j["signal_state"] = to_string(c.setting.signal);
  j["idler_angle_deg"] = c.setting.idler_angle_deg;
  j["hwp_angle_deg"] = 0.5 * c.setting.idler_angle_deg;
  j["signal_singles_hz"] = c.signal_singles_rate;
  j["trigger_rate_hz"] = c.trigger_rate;
  j["gate_rate_hz"] = c.gate_rate;
  j["coincidence_rate_hz"] = c.coincidence_rate;
  j["accidental_rate_hz"] = c.accidental_rate;
  if (mode == RunMode::monte_carlo)
    j["counts"] = {{"signal_singles", c.signal_singles},
                   {"triggers", c.triggers},
                   {"gates", c.gates},
                   {"coincidences", c.coincidences},
                   {"accidentals", c.accidentals}};
  return j;
}

[[nodiscard]] inline Json merit_json(const MeritReport& m) {
  Json j;
  Json bases = Json::array();
  for (const auto& b : m.bases)
    bases.push_back({{"signal_state", to_string(b.state)}, {"visibility", b.visibility}, {"qber", b.qber}});
  j["bases"] = std::move(bases);
  j["qber"] = report_detail::number_or_null(m.qber);
  j["qber_threshold"] = kQberSecurityThreshold;
  j["secure"] = m.secure;
  j["conditional_detection"] = {{"raw", m.conditional.raw}, {"corrected", m.conditional.corrected}};
  j["normalized_brightness"] = m.normalized_brightness;
  return j;
}

/// Report for `budget` and `sim` runs.
[[nodiscard]] inline Json run_report_json(const Scenario& s, const CountsReport& r) {
  Json j = report_detail::header(r.mode == RunMode::budget ? "budget" : "sim", s, r.mode, r.seed);
  j["duration_s"] = r.duration_s;
  Json settings = Json::array();
  for (const auto& c : r.settings) settings.push_back(setting_json(c, r.mode));
  j["settings"] = std::move(settings);
  j["merit"] = merit_json(merit_report(s, r));
  j["warnings"] = r.warnings;
  return j;
}

[[nodiscard]] inline Json curve_report_json(const Scenario& s, const VisibilityCurve& c, const RunSettings& rs) {
  Json j = report_detail::header("curve", s, rs.mode, rs.seed);
  j["duration_s"] = rs.duration_s;
  j["basis"] = to_string(c.signal);
  j["points"] = c.angles_deg.size();
  const auto fit = fit_visibility(c.angles_deg, c.rates_hz);
  j["visibility"] = fit.visibility;
  j["method"] = fit.method;
  j["offset_hz"] = fit.offset;
  j["amplitude_hz"] = fit.amplitude;
  j["phase_deg"] = fit.phase_deg;
  return j;
}

inline void write_curve_csv(std::ostream& out, const VisibilityCurve& c) {
  out << "angle_deg,hwp_deg,basis,rate_hz\n";
  for (std::size_t i = 0; i < c.angles_deg.size(); ++i)
    out << format_double(c.angles_deg[i]) << ',' << format_double(0.5 * c.angles_deg[i]) << ','
        << to_string(c.signal) << ',' << format_double(c.rates_hz[i]) << '\n';
}

/// One sweep row: per-basis visibility, QBER and verdict for a parameter value.
struct SweepRow {
  double param = 0.0;
  double coincidence_rate = 0.0;  // mean over bases
  double accidental_rate = 0.0;
  std::optional<double> visibility[4];  // H, V, D, A
  std::optional<double> qber;
  bool secure = false;
};

[[nodiscard]] inline SweepRow sweep_row(const SweepPoint& p) {
  SweepRow row;
  row.param = p.value;
  const auto merit = merit_report(p.scenario, p.report);
  const auto bases = basis_rates(p.report);
  for (const auto& b : bases) {
    row.coincidence_rate += b.coincidence_rate / static_cast<double>(bases.size());
    row.accidental_rate += b.accidental_rate / static_cast<double>(bases.size());
  }
  for (const auto& b : merit.bases)
    if (b.state != SignalState::open) row.visibility[static_cast<int>(b.state)] = b.visibility;
  row.qber = merit.qber;
  row.secure = merit.secure;
  return row;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  const auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
  out << "param,R_c,R_a,V_H,V_V,V_D,V_A,QBER,secure\n";
  for (const auto& p : points) {
    const auto r = sweep_row(p);
    out << format_double(r.param) << ',' << format_double(r.coincidence_rate) << ','
        << format_double(r.accidental_rate);
    for (const auto& v : r.visibility) out << ',' << opt(v);
    out << ',' << opt(r.qber) << ',' << (r.secure ? "true" : "false") << '\n';
  }
}

}  // namespace qlink
