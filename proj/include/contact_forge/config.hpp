#pragma once

// Scenario configuration: `[section]` headers, `key = value` lines, `#` or `;`
// comments, double-quoted expression values. Numeric values may be constant
// expressions such as 7/6 or pi/2.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "contact_forge/errors.hpp"
#include "contact_forge/expr.hpp"
#include "contact_forge/report.hpp"

namespace cforge {

struct ConfigValue {
  std::string text;
  bool quoted = false;
  std::size_t line = 0;
  std::size_t column = 0;      // of the value
  std::size_t key_column = 0;  // of the key
};

struct ConfigSection {
  std::string name;
  std::size_t line = 0;
  std::vector<std::pair<std::string, ConfigValue>> entries;
};

namespace detail {

inline bool is_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Syntax only; keys and values are checked by `load_scenario`.
inline std::vector<ConfigSection> parse_config_sections(std::string_view text) {
  std::vector<ConfigSection> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    const std::size_t line_start = pos;
    pos = end + 1;

    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size() || line[i] == '#' || line[i] == ';') {
      if (end == text.size()) break;
      continue;
    }
    (void)line_start;
    if (line[i] == '[') {
      const std::size_t close = line.find(']', i);
      if (close == std::string_view::npos) throw ConfigError("missing ']' in section header", line_no, i + 1);
      std::string_view name = detail::trim(line.substr(i + 1, close - i - 1));
      if (name.empty() || !std::all_of(name.begin(), name.end(), detail::is_key_char))
        throw ConfigError("invalid section name", line_no, i + 2);
      std::string_view rest = detail::trim(line.substr(close + 1));
      if (!rest.empty() && rest.front() != '#' && rest.front() != ';')
        throw ConfigError("unexpected text after section header", line_no, close + 2);
      for (const auto& s : out)
        if (s.name == name) throw ConfigError("duplicate section [" + std::string(name) + "]", line_no, i + 1);
      out.push_back({std::string(name), line_no, {}});
    } else {
      const std::size_t key_begin = i;
      while (i < line.size() && detail::is_key_char(line[i])) ++i;
      if (i == key_begin) throw ConfigError("expected a key", line_no, key_begin + 1);
      std::string key(line.substr(key_begin, i - key_begin));
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i == line.size() || line[i] != '=') throw ConfigError("expected '=' after key '" + key + "'", line_no, i + 1);
      ++i;
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      ConfigValue v;
      v.line = line_no;
      v.column = i + 1;
      v.key_column = key_begin + 1;
      if (i < line.size() && line[i] == '"') {
        const std::size_t close = line.find('"', i + 1);
        if (close == std::string_view::npos) throw ConfigError("unterminated string", line_no, i + 1);
        v.text = std::string(line.substr(i + 1, close - i - 1));
        v.quoted = true;
        std::string_view rest = detail::trim(line.substr(close + 1));
        if (!rest.empty() && rest.front() != '#' && rest.front() != ';')
          throw ConfigError("unexpected text after string", line_no, close + 2);
      } else {
        std::string_view raw = line.substr(i);
        const std::size_t hash = raw.find_first_of("#;");
        if (hash != std::string_view::npos) raw = raw.substr(0, hash);
        v.text = std::string(detail::trim(raw));
        if (v.text.empty()) throw ConfigError("missing value for '" + key + "'", line_no, i + 1);
      }
      if (out.empty()) throw ConfigError("entry outside of a section", line_no, key_begin + 1);
      for (const auto& [k, prev] : out.back().entries)
        if (k == key) throw ConfigError("duplicate key '" + key + "'", line_no, key_begin + 1);
      out.back().entries.emplace_back(std::move(key), std::move(v));
    }
    if (end == text.size()) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"constants",         "g_profile",        "bound_on_G",
                                              "conformal_scaling", "squeeze",          "unwrap",
                                              "legendrian",        "exterior_calculus", "pointwise_solvers",
                                              "contact_condition", "custom"};
  return names;
}

struct CustomScenario {
  std::vector<std::string> coordinates;
  std::vector<std::pair<std::string, std::string>> alpha;  // coordinate -> coefficient of d(coordinate)
  std::vector<std::pair<std::string, std::string>> field;  // coordinate -> component
  std::optional<std::string> g;
  double lo = -1.0, hi = 1.0;
  int samples = 200;
};

struct ScenarioConfig {
  std::vector<std::string> suites;  // empty: every suite
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;

  struct {
    int points = 10000;
    double delta = 0.1;
  } g_profile;
  struct {
    int radii = 1000;
    int closed_form_radii = 50;
  } bound_on_G;
  struct {
    int samples = 1000;
    double h = 5.0;
    double delta = 0.1;
    double r_min = 0.01;
    double tolerance = 1e-7;
  } conformal_scaling;
  struct {
    double h = 5.0;
    double h_prime = 1.0;
    double c = 1.0;
    int samples = 10000;
    double target_factor = 7.0 / 6.0;
    int n = 1;
    double delta = 0.1;
  } squeeze;
  struct {
    std::vector<int> n{1, 3};
    double C = 10.0;
    double epsilon = 0.1;
    double delta = 0.5;
    int samples = 1000;
    std::optional<std::vector<double>> hbars;
  } unwrap;
  struct {
    int n = 2;
    int samples = 500;
    double bump_lo = 0.1;
    double bump_hi = 0.9;
  } legendrian;
  struct {
    int samples = 200;
  } exterior_calculus;
  struct {
    int radii = 100;
    int samples = 100;
  } pointwise_solvers;
  struct {
    int samples = 1000;
  } contact_condition;
  std::optional<CustomScenario> custom;
};

namespace detail {

inline double config_number(const ConfigValue& v) {
  try {
    const double x = evaluate(parse(v.text), Environment{});
    if (!std::isfinite(x)) throw ConfigError("value is not finite", v.line, v.column);
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid number: ") + e.what(), v.line, v.column);
  }
}

inline std::vector<ConfigValue> split_list(const ConfigValue& v) {
  std::vector<ConfigValue> items;
  std::size_t start = 0;
  while (start <= v.text.size()) {
    std::size_t comma = v.text.find(',', start);
    if (comma == std::string::npos) comma = v.text.size();
    std::string_view piece(v.text.data() + start, comma - start);
    std::size_t lead = 0;
    while (lead < piece.size() && std::isspace(static_cast<unsigned char>(piece[lead]))) ++lead;
    ConfigValue item = v;
    item.text = std::string(trim(piece));
    item.column = v.column + (v.quoted ? 1 : 0) + start + lead;
    if (item.text.empty()) throw ConfigError("empty list element", v.line, item.column);
    items.push_back(std::move(item));
    start = comma + 1;
  }
  return items;
}

struct Reader {
  const ConfigValue& v;

  double real() const { return config_number(v); }
  double positive() const {
    const double x = real();
    if (!(x > 0)) throw ConfigError("value must be positive", v.line, v.column);
    return x;
  }
  double non_negative() const {
    const double x = real();
    if (!(x >= 0)) throw ConfigError("value must not be negative", v.line, v.column);
    return x;
  }
  int count() const {
    const double x = positive();
    if (x != std::floor(x) || x > 1e8) throw ConfigError("value must be a positive integer", v.line, v.column);
    return static_cast<int>(x);
  }
};

inline std::uint64_t parse_seed(std::string_view text, std::size_t line, std::size_t column) {
  std::uint64_t s = 0;
  text = trim(text);
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), s);
  if (ec != std::errc() || p != text.data() + text.size() || text.empty())
    throw ConfigError("seed must be a non-negative integer", line, column);
  return s;
}

}  // namespace detail

// Parses and validates a scenario. Unknown sections or keys, malformed or
// out-of-range values raise ConfigError with the offending line and column.
inline ScenarioConfig load_scenario(std::string_view text) {
  ScenarioConfig cfg;
  for (const auto& section : parse_config_sections(text)) {
    const std::string& sec = section.name;
    auto unknown = [&](const std::string& key, const ConfigValue& v) -> ConfigError {
      return ConfigError("unknown key '" + key + "' in [" + sec + "]", v.line, v.key_column);
    };
    if (sec == "custom") cfg.custom.emplace();
    for (const auto& [key, v] : section.entries) {
      detail::Reader r{v};
      if (sec == "run") {
        if (key == "suites") {
          cfg.suites.clear();
          for (const auto& item : detail::split_list(v)) {
            if (item.text == "all") continue;
            const auto& names = suite_names();
            if (std::find(names.begin(), names.end(), item.text) == names.end())
              throw ConfigError("unknown suite '" + item.text + "'", item.line, item.column);
            cfg.suites.push_back(item.text);
          }
        } else if (key == "seed") {
          cfg.seed = detail::parse_seed(v.text, v.line, v.column);
        } else if (key == "threads") {
          cfg.threads = r.count();
        } else {
          throw unknown(key, v);
        }
      } else if (sec == "g_profile") {
        if (key == "points") cfg.g_profile.points = r.count();
        else if (key == "delta") cfg.g_profile.delta = r.positive();
        else throw unknown(key, v);
      } else if (sec == "bound_on_G") {
        if (key == "radii") cfg.bound_on_G.radii = r.count();
        else if (key == "closed_form_radii") cfg.bound_on_G.closed_form_radii = r.count();
        else throw unknown(key, v);
      } else if (sec == "conformal_scaling") {
        if (key == "samples") cfg.conformal_scaling.samples = r.count();
        else if (key == "h") cfg.conformal_scaling.h = r.positive();
        else if (key == "delta") cfg.conformal_scaling.delta = r.positive();
        else if (key == "r_min") cfg.conformal_scaling.r_min = r.positive();
        else if (key == "tolerance") cfg.conformal_scaling.tolerance = r.positive();
        else throw unknown(key, v);
      } else if (sec == "squeeze") {
        if (key == "h") cfg.squeeze.h = r.positive();
        else if (key == "h_prime") cfg.squeeze.h_prime = r.positive();
        else if (key == "c") cfg.squeeze.c = r.positive();
        else if (key == "samples") cfg.squeeze.samples = r.count();
        else if (key == "target_factor") cfg.squeeze.target_factor = r.positive();
        else if (key == "n") cfg.squeeze.n = r.count();
        else if (key == "delta") cfg.squeeze.delta = r.positive();
        else throw unknown(key, v);
      } else if (sec == "unwrap") {
        if (key == "n") {
          cfg.unwrap.n.clear();
          for (const auto& item : detail::split_list(v)) cfg.unwrap.n.push_back(detail::Reader{item}.count());
        } else if (key == "C") {
          cfg.unwrap.C = r.positive();
        } else if (key == "epsilon") {
          cfg.unwrap.epsilon = r.positive();
        } else if (key == "delta") {
          cfg.unwrap.delta = r.positive();
        } else if (key == "samples") {
          cfg.unwrap.samples = r.count();
        } else if (key == "hbars") {
          if (v.text == "auto") {
            cfg.unwrap.hbars.reset();
          } else {
            std::vector<double> h;
            for (const auto& item : detail::split_list(v)) h.push_back(detail::Reader{item}.positive());
            cfg.unwrap.hbars = h;
          }
        } else {
          throw unknown(key, v);
        }
      } else if (sec == "legendrian") {
        if (key == "n") cfg.legendrian.n = r.count();
        else if (key == "samples") cfg.legendrian.samples = r.count();
        else if (key == "bump_lo") cfg.legendrian.bump_lo = r.non_negative();
        else if (key == "bump_hi") cfg.legendrian.bump_hi = r.positive();
        else throw unknown(key, v);
      } else if (sec == "exterior_calculus") {
        if (key == "samples") cfg.exterior_calculus.samples = r.count();
        else throw unknown(key, v);
      } else if (sec == "pointwise_solvers") {
        if (key == "radii") cfg.pointwise_solvers.radii = r.count();
        else if (key == "samples") cfg.pointwise_solvers.samples = r.count();
        else throw unknown(key, v);
      } else if (sec == "contact_condition") {
        if (key == "samples") cfg.contact_condition.samples = r.count();
        else throw unknown(key, v);
      } else if (sec == "custom") {
        CustomScenario& c = *cfg.custom;
        auto require_coordinate = [&](const std::string& name) {
          if (std::find(c.coordinates.begin(), c.coordinates.end(), name) == c.coordinates.end())
            throw ConfigError("'" + name + "' is not a declared coordinate", v.line, v.key_column);
        };
        auto require_expression = [&]() {
          try {
            Expr e = parse(v.text);
            for (const auto& s : symbols(e))
              if (std::find(c.coordinates.begin(), c.coordinates.end(), s) == c.coordinates.end())
                throw ConfigError("unknown symbol '" + s + "'", v.line, v.column);
          } catch (const ConfigError&) {
            throw;
          } catch (const Error& e) {
            throw ConfigError(e.what(), v.line, v.column);
          }
        };
        if (key == "coordinates") {
          c.coordinates.clear();
          for (const auto& item : detail::split_list(v)) {
            if (std::find(c.coordinates.begin(), c.coordinates.end(), item.text) != c.coordinates.end())
              throw ConfigError("duplicate coordinate '" + item.text + "'", item.line, item.column);
            c.coordinates.push_back(item.text);
          }
          if (c.coordinates.size() > 9) throw ConfigError("at most 9 coordinates are supported", v.line, v.column);
        } else if (key.starts_with("alpha.") || key.starts_with("field.")) {
          if (c.coordinates.empty()) throw ConfigError("declare coordinates before " + key, v.line, v.key_column);
          const std::string coord = key.substr(6);
          require_coordinate(coord);
          require_expression();
          (key[0] == 'a' ? c.alpha : c.field).emplace_back(coord, v.text);
        } else if (key == "g") {
          if (c.coordinates.empty()) throw ConfigError("declare coordinates before g", v.line, v.key_column);
          require_expression();
          c.g = v.text;
        } else if (key == "lo") {
          c.lo = r.real();
        } else if (key == "hi") {
          c.hi = r.real();
          if (!(c.hi > c.lo)) throw ConfigError("hi must exceed lo", v.line, v.column);
        } else if (key == "samples") {
          c.samples = r.count();
        } else {
          throw unknown(key, v);
        }
      } else if (sec == "constants") {
        throw unknown(key, v);
      } else {
        throw ConfigError("unknown section [" + sec + "]", section.line, 1);
      }
    }
    if (sec == "legendrian" && !(cfg.legendrian.bump_lo < cfg.legendrian.bump_hi && cfg.legendrian.bump_hi <= 1))
      throw ConfigError("bump thresholds must satisfy bump_lo < bump_hi <= 1", section.line, 1);
    if (sec == "custom") {
      const auto& c = *cfg.custom;
      if (c.coordinates.empty()) throw ConfigError("[custom] needs coordinates", section.line, 1);
      if (!c.alpha.empty() && c.coordinates.size() % 2 == 0)
        throw ConfigError("a contact form needs an odd number of coordinates", section.line, 1);
      if (!c.field.empty() && (c.alpha.empty() || !c.g))
        throw ConfigError("a custom field needs alpha and g for the conformal check", section.line, 1);
      if (c.g && c.field.empty()) throw ConfigError("g given without a field", section.line, 1);
    }
  }
  return cfg;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

}  // namespace cforge
