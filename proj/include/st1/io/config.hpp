#pragma once

// Sectioned key = value configuration.
//
//   # comment
//   [rates]
//   unit = ns          ; ns|us give lifetimes, 1/ns|1/us|MHz give rates
//   radiative = 10
//
// Every key is checked against a fixed schema; unknown sections or keys and
// missing unit declarations are reported with their line number.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "st1/hyperfine.hpp"
#include "st1/io/errors.hpp"
#include "st1/onp.hpp"
#include "st1/ratemodel.hpp"
#include "st1/spinham.hpp"

namespace st1::io {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  std::vector<ConfigEntry> entries;
  int line = 0;

  const ConfigEntry* find(std::string_view key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
};

inline const std::map<std::string, std::vector<std::string>>& config_schema() {
  static const std::map<std::string, std::vector<std::string>> schema = {
      {"rates",
       {"unit", "pump", "radiative", "population", "population_plus", "population_minus", "population_zero",
        "decay_plus", "decay_minus", "decay_zero"}},
      {"triplet", {"unit", "D", "E", "g", "field_unit", "Bx", "By", "Bz"}},
      {"hyperfine", {"unit", "A_xx", "A_yy", "A_zz", "A_perp", "nuclear_zeeman", "g_n"}},
      {"onp",
       {"unit", "population", "decay_plus1", "decay_zero", "decay_minus1", "pump", "radiative", "mixing", "alpha",
        "beta", "horizon_ns", "pump_duration_ns", "settling_fraction"}},
      {"atomic", {"unit", "name", "version", "phi_s0_sq", "r3_p", "g_n"}},
      {"fit", {"seed", "components", "baseline", "form", "bootstrap", "max_iterations"}},
      {"simulation",
       {"pulse", "pulse_length_ns", "readout_window_ns", "dark_min_ns", "dark_max_ns", "points", "spacing",
        "tau_max_ns", "tau_step_ns", "window_ns", "step_ns", "field_mt", "axis", "angle_points", "b_min_mt",
        "b_max_mt", "b_points", "f_min_mhz", "f_max_mhz"}},
  };
  return schema;
}

inline constexpr std::uint64_t kDefaultSeed = 12345;

class Config {
 public:
  std::string source;
  std::vector<ConfigSection> sections;

  static Config parse(std::istream& in, const std::string& source = "<config>") {
    Config c;
    c.source = source;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string line = strip_comment(raw);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw DataError(source, line_no, "malformed section header");
        const std::string name = trim(line.substr(1, line.size() - 2));
        if (!config_schema().count(name)) throw DataError(source, line_no, "unknown section [" + name + "]");
        if (c.find(name)) throw DataError(source, line_no, "duplicate section [" + name + "]");
        c.sections.push_back({name, {}, line_no});
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError(source, line_no, "expected key = value");
      if (c.sections.empty()) throw DataError(source, line_no, "key outside of any section");
      ConfigSection* current = &c.sections.back();
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw DataError(source, line_no, "empty key");
      const auto& allowed = config_schema().at(current->name);
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw DataError(source, line_no, "unknown key '" + key + "' in [" + current->name + "]");
      if (current->find(key)) throw DataError(source, line_no, "duplicate key '" + key + "'");
      if (value.empty()) throw DataError(source, line_no, "empty value for '" + key + "'");
      current->entries.push_back({key, value, line_no});
    }
    c.check_units();
    return c;
  }

  static Config parse_string(const std::string& text, const std::string& source = "<string>") {
    std::istringstream in(text);
    return parse(in, source);
  }

  static Config load(const std::filesystem::path& path) {
    const auto resolved = resolve_config_path(path);
    std::ifstream in(resolved);
    if (!in) throw DataError(path.string(), 0, "cannot open config file");
    return parse(in, resolved.string());
  }

  // Relative paths that do not exist are looked up in $ST1_CONFIG_DIR.
  static std::filesystem::path resolve_config_path(const std::filesystem::path& path) {
    if (path.is_absolute() || std::filesystem::exists(path)) return path;
    if (const char* dir = std::getenv("ST1_CONFIG_DIR"); dir && *dir) {
      const auto candidate = std::filesystem::path(dir) / path;
      if (std::filesystem::exists(candidate)) return candidate;
    }
    return path;
  }

  std::string serialize() const {
    std::string out;
    for (std::size_t i = 0; i < sections.size(); ++i) {
      if (i > 0) out += "\n";
      out += "[" + sections[i].name + "]\n";
      for (const auto& e : sections[i].entries) out += e.key + " = " + e.value + "\n";
    }
    return out;
  }

  // Structural equality ignoring line numbers and source.
  bool same_content(const Config& o) const {
    if (sections.size() != o.sections.size()) return false;
    for (std::size_t i = 0; i < sections.size(); ++i) {
      const auto& a = sections[i];
      const auto& b = o.sections[i];
      if (a.name != b.name || a.entries.size() != b.entries.size()) return false;
      for (std::size_t j = 0; j < a.entries.size(); ++j)
        if (a.entries[j].key != b.entries[j].key || a.entries[j].value != b.entries[j].value) return false;
    }
    return true;
  }

  const ConfigSection* find(std::string_view name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }

  bool has(std::string_view section, std::string_view key) const {
    const auto* s = find(section);
    return s && s->find(key);
  }

  std::optional<std::string> get_string(std::string_view section, std::string_view key) const {
    const auto* s = find(section);
    if (!s) return std::nullopt;
    const auto* e = s->find(key);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::optional<double> get_double(std::string_view section, std::string_view key) const {
    const auto* s = find(section);
    if (!s) return std::nullopt;
    const auto* e = s->find(key);
    if (!e) return std::nullopt;
    return to_double(*e);
  }

  double get_double(std::string_view section, std::string_view key, double fallback) const {
    return get_double(section, key).value_or(fallback);
  }

  std::optional<long long> get_int(std::string_view section, std::string_view key) const {
    const auto* s = find(section);
    if (!s) return std::nullopt;
    const auto* e = s->find(key);
    if (!e) return std::nullopt;
    long long v = 0;
    const auto* end = e->value.data() + e->value.size();
    const auto r = std::from_chars(e->value.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) throw DataError(source, e->line, "'" + e->key + "' must be an integer");
    return v;
  }

  std::optional<bool> get_bool(std::string_view section, std::string_view key) const {
    const auto v = get_string(section, key);
    if (!v) return std::nullopt;
    if (*v == "true" || *v == "yes" || *v == "1") return true;
    if (*v == "false" || *v == "no" || *v == "0") return false;
    throw DataError(source, line_of(section, key), "'" + std::string(key) + "' must be true or false");
  }

  int line_of(std::string_view section, std::string_view key) const {
    const auto* s = find(section);
    if (!s) return 0;
    const auto* e = s->find(key);
    return e ? e->line : s->line;
  }

  std::uint64_t seed() const {
    const auto v = get_int("fit", "seed");
    if (v && *v < 0) throw DataError(source, line_of("fit", "seed"), "seed must be >= 0");
    return v ? static_cast<std::uint64_t>(*v) : kDefaultSeed;
  }

  double to_double(const ConfigEntry& e) const {
    const char* b = e.value.c_str();
    char* end = nullptr;
    const double v = std::strtod(b, &end);
    if (end == b || *end != '\0') throw DataError(source, e.line, "'" + e.key + "' is not a number: " + e.value);
    if (!std::isfinite(v)) throw DataError(source, e.line, "'" + e.key + "' must be finite");
    return v;
  }

 private:
  static std::string strip_comment(const std::string& s) {
    const auto p = s.find_first_of("#;");
    return p == std::string::npos ? s : s.substr(0, p);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  void require_unit(const ConfigSection& s, const std::vector<std::string>& allowed, const char* unit_key,
                    const std::vector<std::string>& quantities) const {
    bool any = false;
    for (const auto& q : quantities) any = any || s.find(q);
    const auto* u = s.find(unit_key);
    if (!u) {
      if (any)
        throw DataError(source, s.line, "[" + s.name + "] requires a '" + unit_key + "' declaration");
      return;
    }
    if (std::find(allowed.begin(), allowed.end(), u->value) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
      throw DataError(source, u->line, "unsupported " + std::string(unit_key) + " '" + u->value + "' (" + list + ")");
    }
  }

  void check_units() const {
    const std::vector<std::string> rate_units = {"ns", "us", "1/ns", "1/us", "MHz"};
    for (const auto& s : sections) {
      if (s.name == "rates") {
        require_unit(s, rate_units, "unit",
                     {"pump", "radiative", "population", "population_plus", "population_minus", "population_zero",
                      "decay_plus", "decay_minus", "decay_zero"});
      } else if (s.name == "onp") {
        require_unit(s, rate_units, "unit", {"population", "decay_plus1", "decay_zero", "decay_minus1", "pump", "radiative"});
      } else if (s.name == "triplet") {
        require_unit(s, {"MHz"}, "unit", {"D", "E"});
        require_unit(s, {"mT", "MHz"}, "field_unit", {"Bx", "By", "Bz"});
      } else if (s.name == "hyperfine") {
        require_unit(s, {"MHz"}, "unit", {"A_xx", "A_yy", "A_zz", "A_perp"});
      } else if (s.name == "atomic") {
        require_unit(s, {"au"}, "unit", {"phi_s0_sq", "r3_p"});
      }
    }
  }
};

// Converts a configured value to a rate in 1/ns. Time units denote lifetimes.
inline double rate_in_per_ns(double v, const std::string& unit) {
  if (unit == "ns") return v > 0.0 ? 1.0 / v : 0.0;
  if (unit == "us") return v > 0.0 ? 1.0 / (1000.0 * v) : 0.0;
  if (unit == "1/ns") return v;
  if (unit == "1/us") return v / 1000.0;
  if (unit == "MHz") return v * 1e-3;
  throw DataError("unsupported rate unit '" + unit + "'");
}

inline std::optional<rate::RateParams> rate_params(const Config& c) {
  const auto* s = c.find("rates");
  if (!s) return std::nullopt;
  const std::string unit = c.get_string("rates", "unit").value_or("1/ns");
  auto need = [&](const char* key) {
    const auto v = c.get_double("rates", key);
    if (!v) throw DataError(c.source, s->line, std::string("[rates] is missing '") + key + "'");
    return rate_in_per_ns(*v, unit);
  };
  rate::RateParams p;
  p.pump = c.has("rates", "pump") ? need("pump") : 0.0;
  p.radiative = need("radiative");
  const std::array<const char*, 3> pop_keys = {"population_plus", "population_minus", "population_zero"};
  const std::array<const char*, 3> decay_keys = {"decay_plus", "decay_minus", "decay_zero"};
  for (int i = 0; i < 3; ++i) {
    if (c.has("rates", pop_keys[static_cast<std::size_t>(i)]))
      p.population[static_cast<std::size_t>(i)] = need(pop_keys[static_cast<std::size_t>(i)]);
    else
      p.population[static_cast<std::size_t>(i)] = need("population");
    p.decay[static_cast<std::size_t>(i)] = need(decay_keys[static_cast<std::size_t>(i)]);
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(c.source, s->line, e.what());
  }
  return p;
}

inline std::optional<spin::TripletParams> triplet_params(const Config& c) {
  const auto* s = c.find("triplet");
  if (!s) return std::nullopt;
  spin::TripletParams t;
  const auto d = c.get_double("triplet", "D");
  if (!d) throw DataError(c.source, s->line, "[triplet] is missing 'D'");
  t.d = *d;
  t.e = c.get_double("triplet", "E", 0.0);
  t.g = c.get_double("triplet", "g", 2.0);
  const Eigen::Vector3d b(c.get_double("triplet", "Bx", 0.0), c.get_double("triplet", "By", 0.0),
                          c.get_double("triplet", "Bz", 0.0));
  const std::string fu = c.get_string("triplet", "field_unit").value_or("mT");
  t.field_mt = fu == "MHz" ? Eigen::Vector3d(b / (t.g * constants::bohr_mhz_per_mt)) : b;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(c.source, s->line, e.what());
  }
  return t;
}

inline std::optional<hf::HyperfineParams> hyperfine_params(const Config& c) {
  const auto* s = c.find("hyperfine");
  if (!s) return std::nullopt;
  const auto t = triplet_params(c);
  if (!t) throw DataError(c.source, s->line, "[hyperfine] requires a [triplet] section");
  hf::HyperfineParams p;
  p.triplet = *t;
  const auto azz = c.get_double("hyperfine", "A_zz");
  if (!azz) throw DataError(c.source, s->line, "[hyperfine] is missing 'A_zz'");
  p.a_zz = *azz;
  if (const auto ap = c.get_double("hyperfine", "A_perp")) {
    if (c.has("hyperfine", "A_xx") || c.has("hyperfine", "A_yy"))
      throw DataError(c.source, c.line_of("hyperfine", "A_perp"), "give either A_perp or A_xx/A_yy, not both");
    p.a_xx = p.a_yy = *ap;
  } else {
    const auto ax = c.get_double("hyperfine", "A_xx");
    const auto ay = c.get_double("hyperfine", "A_yy");
    if (!ax || !ay) throw DataError(c.source, s->line, "[hyperfine] needs A_perp or both A_xx and A_yy");
    p.a_xx = *ax;
    p.a_yy = *ay;
  }
  p.nuclear_zeeman = c.get_bool("hyperfine", "nuclear_zeeman").value_or(false);
  p.g_n = c.get_double("hyperfine", "g_n", constants::g_carbon13);
  return p;
}

struct OnpConfig {
  onp::OnpRates rates;
  onp::Mixing mixing;
  onp::OnpOptions options;
};

inline std::optional<OnpConfig> onp_config(const Config& c) {
  const auto* s = c.find("onp");
  if (!s) return std::nullopt;
  const std::string unit = c.get_string("onp", "unit").value_or("1/ns");
  auto need = [&](const char* key) {
    const auto v = c.get_double("onp", key);
    if (!v) throw DataError(c.source, s->line, std::string("[onp] is missing '") + key + "'");
    return rate_in_per_ns(*v, unit);
  };
  OnpConfig o;
  o.rates.population = need("population");
  o.rates.decay_plus1 = need("decay_plus1");
  o.rates.decay_zero = need("decay_zero");
  o.rates.decay_minus1 = need("decay_minus1");
  o.rates.pump = need("pump");
  o.rates.radiative = need("radiative");
  const std::string mixing = c.get_string("onp", "mixing").value_or("explicit");
  if (mixing == "lac_center") {
    if (c.has("onp", "alpha") || c.has("onp", "beta"))
      throw DataError(c.source, c.line_of("onp", "mixing"), "mixing = lac_center takes no alpha/beta");
    o.mixing = onp::Mixing::lac_center();
  } else if (mixing == "explicit") {
    const auto a = c.get_double("onp", "alpha");
    const auto b = c.get_double("onp", "beta");
    if (!a || !b) throw DataError(c.source, s->line, "[onp] needs alpha and beta (or mixing = lac_center)");
    o.mixing = {*a, *b};
  } else {
    throw DataError(c.source, c.line_of("onp", "mixing"), "mixing must be lac_center or explicit");
  }
  o.options.readout_horizon = c.get_double("onp", "horizon_ns", o.options.readout_horizon);
  o.options.polarize.pump_duration = c.get_double("onp", "pump_duration_ns", o.options.polarize.pump_duration);
  o.options.settling_fraction = c.get_double("onp", "settling_fraction", o.options.settling_fraction);
  try {
    o.rates.validate();
    onp::OnpModel check(o.rates, o.mixing);
    (void)check;
  } catch (const std::invalid_argument& e) {
    throw DataError(c.source, s->line, e.what());
  }
  return o;
}

inline std::optional<hf::AtomicConstants> atomic_constants(const Config& c) {
  const auto* s = c.find("atomic");
  if (!s) return std::nullopt;
  hf::AtomicConstants a;
  a.name = c.get_string("atomic", "name").value_or(a.name);
  a.version = c.get_string("atomic", "version").value_or(a.version);
  a.phi_s0_sq = c.get_double("atomic", "phi_s0_sq", a.phi_s0_sq);
  a.r3_p = c.get_double("atomic", "r3_p", a.r3_p);
  a.g_n = c.get_double("atomic", "g_n", a.g_n);
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(c.source, s->line, e.what());
  }
  return a;
}

}  // namespace st1::io
