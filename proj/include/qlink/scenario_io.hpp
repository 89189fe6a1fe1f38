#pragma once

// Scenario files: a sectioned key = value text format.
//
//   # comment
//   [source]
//   pump_power_per_crystal_mw = 4
//   [channel.fiber]        each channel section appends one element, in order
//   length_km = 27
//
// Unknown sections and keys are errors. The canonical serializer writes every
// field, so parse(serialize(s)) == s, and the scenario hash is taken over it.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qlink/scenario.hpp"

namespace qlink {

/// Configuration error carrying one message per problem.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> messages)
      : std::runtime_error(join(messages)), messages_(std::move(messages)) {}
  [[nodiscard]] const std::vector<std::string>& messages() const { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& m) {
    std::string out;
    for (const auto& s : m) out += (out.empty() ? "" : "\n") + s;
    return out;
  }
  std::vector<std::string> messages_;
};

namespace io_detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  while (true) {
    const auto c = s.find(',');
    out.push_back(trim(s.substr(0, c)));
    if (c == std::string_view::npos) break;
    s = s.substr(c + 1);
  }
  return out;
}

}  // namespace io_detail

/// Shortest decimal text that reads back to the same double.
[[nodiscard]] inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

[[nodiscard]] inline double parse_double(std::string_view text) {
  text = io_detail::trim(text);
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto r = std::from_chars(first, text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw std::invalid_argument("expected a number, got '" + std::string(text) + "'");
  return v;
}

template <class Int>
[[nodiscard]] Int parse_integer(std::string_view text) {
  text = io_detail::trim(text);
  Int v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw std::invalid_argument("expected an integer, got '" + std::string(text) + "'");
  return v;
}

[[nodiscard]] inline bool parse_bool(std::string_view text) {
  text = io_detail::trim(text);
  if (text == "true") return true;
  if (text == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(text) + "'");
}

[[nodiscard]] inline AnalyzerSetting parse_setting(std::string_view text) {
  text = io_detail::trim(text);
  const auto at = text.find('@');
  if (at == std::string_view::npos) throw std::invalid_argument("expected STATE@ANGLE, got '" + std::string(text) + "'");
  const auto state = signal_state_from_string(io_detail::trim(text.substr(0, at)));
  if (!state) throw std::invalid_argument("unknown signal state in '" + std::string(text) + "'");
  return {*state, parse_double(text.substr(at + 1))};
}

[[nodiscard]] inline std::string format_setting(const AnalyzerSetting& s) {
  return std::string(to_string(s.signal)) + "@" + format_double(s.idler_angle_deg);
}

/// One key of a section. `numeric` marks scalar fields that can be swept.
template <class Obj>
struct Field {
  std::string key;
  std::function<std::string(const Obj&)> get;
  std::function<void(Obj&, std::string_view)> set;
  std::function<void(Obj&, double)> set_number;  // empty unless sweepable
};

namespace io_detail {

template <class Obj, class Acc>
Field<Obj> number(std::string key, Acc acc) {
  return {std::move(key), [acc](const Obj& o) { return format_double(acc(const_cast<Obj&>(o))); },
          [acc](Obj& o, std::string_view t) { acc(o) = parse_double(t); }, [acc](Obj& o, double v) { acc(o) = v; }};
}

template <class Obj, class Acc>
Field<Obj> integer(std::string key, Acc acc) {
  using T = std::remove_reference_t<decltype(acc(std::declval<Obj&>()))>;
  return {std::move(key), [acc](const Obj& o) { return std::to_string(acc(const_cast<Obj&>(o))); },
          [acc](Obj& o, std::string_view t) { acc(o) = parse_integer<T>(t); },
          [acc](Obj& o, double v) {
            if (v != std::floor(v) || v < 0.0) throw std::invalid_argument("value must be a non-negative integer");
            acc(o) = static_cast<T>(v);
          }};
}

template <class Obj, class Acc>
Field<Obj> boolean(std::string key, Acc acc) {
  return {std::move(key), [acc](const Obj& o) { return std::string(acc(const_cast<Obj&>(o)) ? "true" : "false"); },
          [acc](Obj& o, std::string_view t) { acc(o) = parse_bool(t); }, nullptr};
}

template <class Obj, class E, class Acc>
Field<Obj> enumeration(std::string key, std::vector<std::pair<std::string, E>> names, Acc acc) {
  return {std::move(key),
          [acc, names](const Obj& o) {
            for (const auto& [n, e] : names)
              if (e == acc(const_cast<Obj&>(o))) return n;
            return std::string("?");
          },
          [acc, names](Obj& o, std::string_view t) {
            t = trim(t);
            std::string allowed;
            for (const auto& [n, e] : names) {
              if (n == t) {
                acc(o) = e;
                return;
              }
              allowed += (allowed.empty() ? "" : ", ") + n;
            }
            throw std::invalid_argument("expected one of " + allowed + ", got '" + std::string(t) + "'");
          },
          nullptr};
}

template <class Obj, class Acc>
Field<Obj> number_list(std::string key, Acc acc) {
  return {std::move(key),
          [acc](const Obj& o) {
            std::string out;
            for (double x : acc(const_cast<Obj&>(o))) out += (out.empty() ? "" : ", ") + format_double(x);
            return out;
          },
          [acc](Obj& o, std::string_view t) {
            std::vector<double> v;
            for (auto item : split_list(t)) v.push_back(parse_double(item));
            acc(o) = std::move(v);
          },
          nullptr};
}

}  // namespace io_detail

struct Section {
  std::string name;
  std::vector<Field<Scenario>> fields;
};

/// Sections holding scalar scenario fields, in canonical order.
[[nodiscard]] inline const std::vector<Section>& scenario_sections() {
  using namespace io_detail;
  using S = Scenario;
  static const std::vector<Section> sections = [] {
    std::vector<Section> v;
    v.push_back({"scenario", {{"name", [](const S& s) { return s.name; },
                               [](S& s, std::string_view t) { s.name = std::string(trim(t)); }, nullptr}}});
    v.push_back(
        {"source",
         {
             number<S>("brightness_pairs_per_s_thz_mw", [](S& s) -> double& { return s.source.brightness; }),
             number<S>("pump_power_per_crystal_mw", [](S& s) -> double& { return s.source.pump_power_per_crystal_mw; }),
             integer<S>("crystals_pumped", [](S& s) -> int& { return s.source.crystals_pumped; }),
             enumeration<S, CrystalPolarization>("single_crystal", {{"V", CrystalPolarization::V}, {"H", CrystalPolarization::H}},
                                                 [](S& s) -> CrystalPolarization& { return s.source.single_crystal; }),
             number<S>("crystal_length_mm", [](S& s) -> double& { return s.source.crystal_length_mm; }),
             number<S>("pump_wavelength_nm", [](S& s) -> double& { return s.source.pump.nm; }),
             number<S>("signal_wavelength_nm", [](S& s) -> double& { return s.source.signal.nm; }),
             number<S>("idler_wavelength_nm", [](S& s) -> double& { return s.source.idler.nm; }),
             number<S>("idler_bandwidth_nm", [](S& s) -> double& { return s.source.idler_bandwidth.fwhm_nm; }),
             number<S>("idler_coherence_time_ps", [](S& s) -> double& { return s.source.idler_coherence_time_ps; }),
             number<S>("base_phase_rad", [](S& s) -> double& { return s.source.base_phase_rad; }),
             number<S>("phase_temp_slope_rad_per_c", [](S& s) -> double& { return s.source.phase_temp_slope_rad_per_c; }),
             number<S>("temperature_offset_c", [](S& s) -> double& { return s.source.temperature_offset_c; }),
             number<S>("weight_v", [](S& s) -> double& { return s.source.weight_v; }),
             enumeration<S, OverlapKind>("overlap_model", {{"triangular", OverlapKind::triangular}, {"gaussian", OverlapKind::gaussian}},
                                         [](S& s) -> OverlapKind& { return s.overlap.kind; }),
             number<S>("overlap_width_ps", [](S& s) -> double& { return s.overlap.width_ps; }),
             number<S>("alice_coupling_loss_db", [](S& s) -> double& { return s.alice_coupling_loss_db; }),
         }});
    v.push_back({"compensators", {number_list<S>("delays_ps", [](S& s) -> std::vector<double>& { return s.compensators.delays_ps; })}});
    v.push_back(
        {"sync",
         {
             boolean<S>("multiplexed", [](S& s) -> bool& { return s.sync.multiplexed; }),
             number<S>("wavelength_nm", [](S& s) -> double& { return s.sync.wavelength.nm; }),
             number<S>("launch_pulse_power_dbm", [](S& s) -> double& { return s.sync.launch_pulse_power_dbm; }),
             number<S>("pulse_width_ns", [](S& s) -> double& { return s.sync.pulse_width_ns; }),
             number<S>("offset_behind_photon_ns", [](S& s) -> double& { return s.sync.offset_behind_photon_ns; }),
             number<S>("idle_floor_power_dbm", [](S& s) -> double& { return s.sync.idle_floor_power_dbm; }),
             number<S>("fluorescence_dbm", [](S& s) -> double& { return s.sync.fluorescence_dbm; }),
             number_list<S>("transmitter_filters_db", [](S& s) -> std::vector<double>& { return s.sync.transmitter_filters_db; }),
             number<S>("receiver_isolation_db", [](S& s) -> double& { return s.sync.receiver_isolation_db; }),
             number<S>("mux_isolation_db", [](S& s) -> double& { return s.sync.mux_isolation_db; }),
             boolean<S>("pulse_overlaps_gate", [](S& s) -> bool& { return s.sync.pulse_overlaps_gate; }),
             boolean<S>("allow_budget_failure", [](S& s) -> bool& { return s.sync.allow_budget_failure; }),
             number<S>("receiver_threshold_dbm", [](S& s) -> double& { return s.sync_rx.threshold_dbm; }),
             number<S>("receiver_latency_ns", [](S& s) -> double& { return s.sync_rx.latency_ns; }),
             number<S>("receiver_delay_error_ns", [](S& s) -> double& { return s.receiver_delay_error_ns; }),
         }});
    v.push_back(
        {"detectors",
         {
             boolean<S>("signal_analyzer", [](S& s) -> bool& { return s.signal_analyzer; }),
             number<S>("signal_analyzer_loss_db", [](S& s) -> double& { return s.signal_analyzer_loss_db; }),
             number<S>("signal_efficiency", [](S& s) -> double& { return s.signal_detector.efficiency; }),
             number<S>("signal_dark_rate_hz", [](S& s) -> double& { return s.signal_detector.dark_rate_hz; }),
             number<S>("signal_pulse_width_ns", [](S& s) -> double& { return s.signal_detector.output_pulse_width_ns; }),
             boolean<S>("idler_analyzer", [](S& s) -> bool& { return s.idler_analyzer; }),
             number<S>("bob_analyzer_loss_db", [](S& s) -> double& { return s.bob_analyzer_loss_db; }),
             number<S>("idler_efficiency", [](S& s) -> double& { return s.idler_detector.efficiency; }),
             number<S>("idler_gate_ns", [](S& s) -> double& { return s.idler_detector.gate_width_ns; }),
             number<S>("idler_holdoff_us", [](S& s) -> double& { return s.idler_detector.holdoff_us; }),
             enumeration<S, HoldoffSemantics>("idler_holdoff_semantics",
                                              {{"after_detection", HoldoffSemantics::after_detection},
                                               {"after_every_gate", HoldoffSemantics::after_every_gate}},
                                              [](S& s) -> HoldoffSemantics& { return s.idler_detector.holdoff_semantics; }),
             number<S>("idler_dark_prob_per_gate", [](S& s) -> double& { return s.idler_detector.dark_prob_per_gate; }),
             number<S>("idler_timing_jitter_ps", [](S& s) -> double& { return s.idler_detector.timing_jitter_ps; }),
             boolean<S>("uncorrelated_idler_background", [](S& s) -> bool& { return s.uncorrelated_idler_background; }),
         }});
    v.push_back({"tdc",
                 {
                     boolean<S>("enabled", [](S& s) -> bool& { return s.tdc.enabled; }),
                     number<S>("overlap_window_ns", [](S& s) -> double& { return s.tdc.overlap_window_ns; }),
                     number<S>("true_coincidence_pass", [](S& s) -> double& { return s.tdc.true_coincidence_pass; }),
                 }});
    v.push_back({"drift",
                 {
                     number<S>("drift_rate_rad_per_min", [](S& s) -> double& { return s.drift.drift_rate_rad_per_min; }),
                     number<S>("initial_misalignment_rad", [](S& s) -> double& { return s.drift.initial_misalignment_rad; }),
                 }});
    v.push_back({"run",
                 {
                     enumeration<S, RunMode>("mode", {{"budget", RunMode::budget}, {"monte-carlo", RunMode::monte_carlo}},
                                             [](S& s) -> RunMode& { return s.run.mode; }),
                     number<S>("duration_s", [](S& s) -> double& { return s.run.duration_s; }),
                     integer<S>("seed", [](S& s) -> std::uint64_t& { return s.run.seed; }),
                     {"settings",
                      [](const S& s) {
                        std::string out;
                        for (const auto& st : s.run.settings) out += (out.empty() ? "" : ", ") + format_setting(st);
                        return out;
                      },
                      [](S& s, std::string_view t) {
                        s.run.settings.clear();
                        for (auto item : split_list(t)) s.run.settings.push_back(parse_setting(item));
                      },
                      nullptr},
                 }});
    return v;
  }();
  return sections;
}

[[nodiscard]] inline const std::vector<Field<FiberSpan>>& fiber_fields() {
  using namespace io_detail;
  static const std::vector<Field<FiberSpan>> f{
      number<FiberSpan>("length_km", [](FiberSpan& x) -> double& { return x.length_km; }),
      number<FiberSpan>("attenuation_db_per_km", [](FiberSpan& x) -> double& { return x.attenuation_db_per_km; }),
      number<FiberSpan>("dispersion_ps_per_nm_km", [](FiberSpan& x) -> double& { return x.dispersion_ps_per_nm_km; }),
  };
  return f;
}

[[nodiscard]] inline const std::vector<Field<Filter>>& filter_fields() {
  using namespace io_detail;
  static const std::vector<Field<Filter>> f{
      number<Filter>("insertion_loss_db", [](Filter& x) -> double& { return x.insertion_loss_db; }),
      number<Filter>("isolation_db", [](Filter& x) -> double& { return x.isolation_db; }),
      number<Filter>("center_nm", [](Filter& x) -> double& { return x.center.nm; }),
      number<Filter>("flat_top_width_nm", [](Filter& x) -> double& { return x.flat_top_width_nm; }),
      number<Filter>("fwhm_nm", [](Filter& x) -> double& { return x.fwhm_nm; }),
  };
  return f;
}

namespace io_detail {

template <class Obj>
const Field<Obj>* find_field(const std::vector<Field<Obj>>& fields, std::string_view key) {
  for (const auto& f : fields)
    if (f.key == key) return &f;
  return nullptr;
}

inline std::string parse_index_suffix(std::string_view& name, std::size_t& index) {
  // "base[3]" -> name "base", index 3
  const auto open = name.find('[');
  if (open == std::string_view::npos || name.back() != ']') return "expected an index";
  index = parse_integer<std::size_t>(name.substr(open + 1, name.size() - open - 2));
  name = name.substr(0, open);
  return {};
}

}  // namespace io_detail

/// Paths accepted by set_numeric_field for this scenario.
[[nodiscard]] inline std::vector<std::string> numeric_field_paths(const Scenario& s) {
  std::vector<std::string> out;
  for (const auto& sec : scenario_sections())
    for (const auto& f : sec.fields)
      if (f.set_number) out.push_back(sec.name + "." + f.key);
  for (std::size_t i = 0; i < s.compensators.delays_ps.size(); ++i)
    out.push_back("compensators.delays_ps[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < s.sync.transmitter_filters_db.size(); ++i)
    out.push_back("sync.transmitter_filters_db[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < s.channel.size(); ++i) {
    const std::string p = "channel[" + std::to_string(i) + "].";
    if (std::holds_alternative<FiberSpan>(s.channel[i]))
      for (const auto& f : fiber_fields()) out.push_back(p + f.key);
    else
      for (const auto& f : filter_fields()) out.push_back(p + f.key);
  }
  return out;
}

/// Sets a numeric field addressed as "section.key", "channel[i].key" or
/// "section.list_key[i]". Throws std::invalid_argument for unknown paths.
inline void set_numeric_field(Scenario& s, std::string_view path, double value) {
  const auto unknown = [&] { return std::invalid_argument("unknown numeric field '" + std::string(path) + "'"); };
  const auto dot = path.find('.');
  if (dot == std::string_view::npos) throw unknown();
  std::string_view head = path.substr(0, dot);
  std::string_view key = path.substr(dot + 1);

  if (head.starts_with("channel[")) {
    std::size_t i = 0;
    try {
      if (!io_detail::parse_index_suffix(head, i).empty()) throw unknown();
    } catch (const std::invalid_argument&) {
      throw unknown();
    }
    if (i >= s.channel.size()) throw unknown();
    if (auto* f = std::get_if<FiberSpan>(&s.channel[i])) {
      const auto* fld = io_detail::find_field(fiber_fields(), key);
      if (!fld) throw unknown();
      fld->set_number(*f, value);
    } else {
      auto& fl = std::get<Filter>(s.channel[i]);
      const auto* fld = io_detail::find_field(filter_fields(), key);
      if (!fld) throw unknown();
      fld->set_number(fl, value);
    }
    return;
  }
  if (key.ends_with("]")) {
    std::size_t i = 0;
    try {
      if (!io_detail::parse_index_suffix(key, i).empty()) throw unknown();
    } catch (const std::invalid_argument&) {
      throw unknown();
    }
    std::vector<double>* list = nullptr;
    if (head == "compensators" && key == "delays_ps") list = &s.compensators.delays_ps;
    if (head == "sync" && key == "transmitter_filters_db") list = &s.sync.transmitter_filters_db;
    if (!list || i >= list->size()) throw unknown();
    (*list)[i] = value;
    return;
  }
  for (const auto& sec : scenario_sections()) {
    if (sec.name != head) continue;
    const auto* f = io_detail::find_field(sec.fields, key);
    if (!f || !f->set_number) throw unknown();
    f->set_number(s, value);
    return;
  }
  throw unknown();
}

/// Canonical text form: every section and key in registry order.
[[nodiscard]] inline std::string serialize_scenario(const Scenario& s) {
  std::string out;
  const auto& secs = scenario_sections();
  const auto write_section = [&](const Section& sec) {
    out += "[" + sec.name + "]\n";
    for (const auto& f : sec.fields) out += f.key + " = " + f.get(s) + "\n";
    out += "\n";
  };
  for (const auto& sec : secs) {
    if (sec.name == "sync") {
      for (const auto& e : s.channel) {
        if (const auto* f = std::get_if<FiberSpan>(&e)) {
          out += "[channel.fiber]\n";
          for (const auto& fld : fiber_fields()) out += fld.key + " = " + fld.get(*f) + "\n";
        } else {
          out += "[channel.filter]\n";
          for (const auto& fld : filter_fields()) out += fld.key + " = " + fld.get(std::get<Filter>(e)) + "\n";
        }
        out += "\n";
      }
    }
    write_section(sec);
  }
  return out;
}

/// 64-bit FNV-1a of the canonical form, as 16 hex digits.
[[nodiscard]] inline std::string scenario_hash(const Scenario& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_scenario(s)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ParsedScenario {
  Scenario scenario;
  std::map<std::string, int> lines;  // field path -> line where it was set
};

/// Parses scenario text without semantic validation. Throws ConfigError listing
/// every syntax problem as "origin:line: message".
[[nodiscard]] inline ParsedScenario parse_scenario_text(std::string_view text, std::string_view origin = "<input>") {
  ParsedScenario out;
  Scenario& s = out.scenario;
  std::vector<std::string> errors;
  const auto error = [&](int line, const std::string& msg) {
    errors.push_back(std::string(origin) + ":" + std::to_string(line) + ": " + msg);
  };

  std::string section;
  std::string path_prefix;
  std::map<std::string, int> seen;  // keys in the current section instance
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io_detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        error(line_no, "malformed section header '" + std::string(line) + "'");
        section.clear();
        continue;
      }
      section = std::string(io_detail::trim(line.substr(1, line.size() - 2)));
      seen.clear();
      if (section == "channel.fiber" || section == "channel.filter") {
        if (section == "channel.fiber")
          s.channel.emplace_back(FiberSpan{});
        else
          s.channel.emplace_back(Filter{});
        path_prefix = "channel[" + std::to_string(s.channel.size() - 1) + "].";
        out.lines[path_prefix.substr(0, path_prefix.size() - 1)] = line_no;
        continue;
      }
      bool known = false;
      for (const auto& sec : scenario_sections()) known = known || sec.name == section;
      if (!known) {
        error(line_no, "unknown section [" + section + "]");
        section = "!";
      }
      path_prefix = section + ".";
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      error(line_no, "expected 'key = value', got '" + std::string(line) + "'");
      continue;
    }
    const std::string key(io_detail::trim(line.substr(0, eq)));
    const std::string_view value = io_detail::trim(line.substr(eq + 1));
    if (section.empty()) {
      error(line_no, "key '" + key + "' appears before any [section]");
      continue;
    }
    if (section == "!") continue;  // already reported
    if (const auto it = seen.find(key); it != seen.end()) {
      error(line_no, "duplicate key '" + key + "' in [" + section + "] (first set on line " +
                         std::to_string(it->second) + ")");
      continue;
    }
    seen[key] = line_no;

    try {
      bool found = false;
      if (section == "channel.fiber") {
        if (const auto* f = io_detail::find_field(fiber_fields(), key)) {
          f->set(std::get<FiberSpan>(s.channel.back()), value);
          found = true;
        }
      } else if (section == "channel.filter") {
        if (const auto* f = io_detail::find_field(filter_fields(), key)) {
          f->set(std::get<Filter>(s.channel.back()), value);
          found = true;
        }
      } else {
        for (const auto& sec : scenario_sections()) {
          if (sec.name != section) continue;
          if (const auto* f = io_detail::find_field(sec.fields, key)) {
            f->set(s, value);
            found = true;
          }
        }
      }
      if (!found) {
        error(line_no, "unknown key '" + key + "' in [" + section + "]");
        continue;
      }
      out.lines[path_prefix + key] = line_no;
    } catch (const std::invalid_argument& e) {
      error(line_no, key + ": " + e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return out;
}

/// Formats violations with the line of the offending field when known.
[[nodiscard]] inline std::vector<std::string> describe_violations(const std::vector<Violation>& violations,
                                                                  const std::map<std::string, int>& lines,
                                                                  std::string_view origin) {
  std::vector<std::string> out;
  for (const auto& v : violations) {
    auto it = lines.find(v.field);
    if (it == lines.end()) {
      // list element or channel element: fall back to the list key / section header
      std::string base = v.field;
      if (const auto b = base.rfind('['); b != std::string::npos && base.back() == ']') base = base.substr(0, b);
      it = lines.find(base);
      if (it == lines.end() && base.starts_with("channel[")) it = lines.find(base.substr(0, base.find(']') + 1));
    }
    std::string msg = std::string(origin);
    if (it != lines.end()) msg += ":" + std::to_string(it->second);
    out.push_back(msg + ": " + v.field + ": " + v.message);
  }
  return out;
}

/// Parses and validates. Throws ConfigError on any syntax error or invariant violation.
[[nodiscard]] inline Scenario load_scenario_text(std::string_view text, std::string_view origin = "<input>") {
  auto parsed = parse_scenario_text(text, origin);
  const auto v = validate_scenario(parsed.scenario);
  if (!v.empty()) throw ConfigError(describe_violations(v, parsed.lines, origin));
  return std::move(parsed.scenario);
}

[[nodiscard]] inline Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string() + ": cannot open scenario file"});
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scenario_text(buf.str(), path.string());
}

}  // namespace qlink
