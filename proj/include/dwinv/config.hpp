#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dwinv/grid.hpp"
#include "dwinv/util.hpp"
#include "dwinv/wave.hpp"

namespace dwinv {

inline constexpr const char* kArtifactVersion = "1.0.0";

namespace toml {

struct Value {
  enum class Kind { string, number, boolean, array };
  Kind kind = Kind::number;
  std::string s;
  double d = 0.0;
  bool b = false;
  std::vector<double> arr;
  int line = 0;
};

struct Table {
  // section -> key -> value, with source lines for error messages
  std::map<std::string, std::map<std::string, Value>> sections;
  std::map<std::string, int> section_lines;
  std::string source;  // file name used in diagnostics
};

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] inline void fail(const std::string& src, int line, const std::string& msg) {
  throw config_error(strfmt("%s:%d: %s", src.c_str(), line, msg.c_str()));
}

inline double parse_number(const std::string& text, const std::string& src, int line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    fail(src, line, strfmt("cannot parse '%s' as a number", text.c_str()));
  return v;
}

inline Value parse_value(const std::string& raw, const std::string& src, int line) {
  Value v;
  v.line = line;
  if (raw.empty()) fail(src, line, "missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      fail(src, line, "unterminated string value");
    v.kind = Value::Kind::string;
    v.s = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = Value::Kind::boolean;
    v.b = raw == "true";
    return v;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') fail(src, line, "unterminated array value");
    v.kind = Value::Kind::array;
    std::string body = trim(raw.substr(1, raw.size() - 2));
    if (!body.empty()) {
      std::stringstream ss(body);
      std::string item;
      while (std::getline(ss, item, ','))
        v.arr.push_back(parse_number(trim(item), src, line));
    }
    return v;
  }
  v.kind = Value::Kind::number;
  v.d = parse_number(raw, src, line);
  return v;
}

/// Minimal TOML subset: [sections], key = value, # comments. Values are
/// strings, booleans, numbers, and flat numeric arrays.
inline Table parse(const std::string& text, const std::string& source_name) {
  Table tbl;
  tbl.source = source_name;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    // strip comments outside quotes
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(source_name, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(source_name, lineno, "empty section name");
      if (!tbl.sections.count(section)) {
        tbl.sections[section] = {};
        tbl.section_lines[section] = lineno;
      }
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(source_name, lineno, strfmt("expected 'key = value', got '%s'", line.c_str()));
    std::string key = trim(line.substr(0, eq));
    std::string raw = trim(line.substr(eq + 1));
    if (key.empty()) fail(source_name, lineno, "empty key");
    if (section.empty()) fail(source_name, lineno, strfmt("key '%s' before any [section]", key.c_str()));
    if (tbl.sections[section].count(key))
      fail(source_name, lineno, strfmt("duplicate key '%s' in [%s]", key.c_str(), section.c_str()));
    tbl.sections[section][key] = parse_value(raw, source_name, lineno);
  }
  return tbl;
}

}  // namespace toml

struct DampingSpec {
  std::string profile = "constant";
  double level = 0.5;                   // constant
  double center = 0.5, width = 0.25, height = 0.5;  // bump
  std::vector<double> breaks, levels;   // piecewise
  double offset = 0.3, amplitude = 0.2;  // sine

  double evaluate(double y) const {
    if (profile == "constant") return level;
    if (profile == "bump") {
      double r = (y - center) / width;
      if (std::abs(r) >= 1.0) return 0.0;
      double c = std::cos(0.5 * 3.14159265358979323846 * r);
      return height * c * c;
    }
    if (profile == "piecewise") {
      size_t i = 0;
      while (i < breaks.size() && y >= breaks[i]) ++i;
      return levels[i];
    }
    // sine
    return offset + amplitude * std::sin(3.14159265358979323846 * y);
  }
};

struct ExperimentConfig {
  int dim = 1;
  int nx = 256;
  int ny = 256;
  double tau = 2.0;
  double cfl_factor = 0.0;  // 0 = dimension default
  DampingSpec damping;
  int mode = 0;
  std::vector<double> rho_grid;
  double recon_rho = 0.01;
  double ridge = 0.0;
  double noise_level = 0.0;
  uint64_t seed = 20240901;
  std::string out_dir = "out";
  bool dump = false;

  DomainMesh make_mesh() const {
    return dim == 1 ? build_interval_mesh(nx) : build_rectangle_mesh(nx, ny);
  }
  TimeGrid make_time(const DomainMesh& mesh) const {
    return cfl_factor > 0.0 ? make_time_grid(tau, mesh, cfl_factor) : make_time_grid(tau, mesh);
  }
  DampingField make_damping(const DomainMesh& mesh) const {
    Eigen::VectorXd vals(static_cast<Eigen::Index>(mesh.gamma1.size()));
    for (size_t j = 0; j < mesh.gamma1.size(); ++j) {
      const auto& p = mesh.nodes[mesh.gamma1[j]];
      double y = mesh.dim == 1 ? p[0] : p[1];
      vals[static_cast<Eigen::Index>(j)] = damping.evaluate(y);
    }
    return DampingField(mesh, vals);
  }

  std::string canonical_text() const;
  uint64_t config_hash() const { return fnv1a64(canonical_text()); }
};

inline std::string ExperimentConfig::canonical_text() const {
  std::string s;
  s += "[domain]\n";
  s += strfmt("dim = %d\n", dim);
  s += strfmt("nx = %d\n", nx);
  if (dim == 2) s += strfmt("ny = %d\n", ny);
  s += "[time]\n";
  s += "tau = " + format_g17(tau) + "\n";
  if (cfl_factor > 0.0) s += "cfl_factor = " + format_g17(cfl_factor) + "\n";
  s += "[damping]\n";
  s += "profile = \"" + damping.profile + "\"\n";
  if (damping.profile == "constant") {
    s += "level = " + format_g17(damping.level) + "\n";
  } else if (damping.profile == "bump") {
    s += "center = " + format_g17(damping.center) + "\n";
    s += "width = " + format_g17(damping.width) + "\n";
    s += "height = " + format_g17(damping.height) + "\n";
  } else if (damping.profile == "piecewise") {
    auto arr = [](const std::vector<double>& v) {
      std::string a = "[";
      for (size_t i = 0; i < v.size(); ++i) a += (i ? ", " : "") + format_g17(v[i]);
      return a + "]";
    };
    s += "breaks = " + arr(damping.breaks) + "\n";
    s += "levels = " + arr(damping.levels) + "\n";
  } else {
    s += "offset = " + format_g17(damping.offset) + "\n";
    s += "amplitude = " + format_g17(damping.amplitude) + "\n";
  }
  s += "[initial]\n";
  s += strfmt("mode = %d\n", mode);
  s += "[sweep]\n";
  s += "rho = [";
  for (size_t i = 0; i < rho_grid.size(); ++i) s += (i ? ", " : "") + format_g17(rho_grid[i]);
  s += "]\n";
  s += "[reconstruct]\n";
  s += "rho = " + format_g17(recon_rho) + "\n";
  s += "ridge = " + format_g17(ridge) + "\n";
  s += "[noise]\n";
  s += "level = " + format_g17(noise_level) + "\n";
  s += strfmt("seed = %llu\n", static_cast<unsigned long long>(seed));
  s += "[output]\n";
  s += "dir = \"" + out_dir + "\"\n";
  return s;
}

namespace detail {

struct ConfigReader {
  const toml::Table& tbl;
  std::set<std::string> consumed;  // "section.key" pairs seen by the schema

  const toml::Value* find(const std::string& section, const std::string& key) {
    consumed.insert(section + "." + key);
    auto s = tbl.sections.find(section);
    if (s == tbl.sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  double number(const std::string& sec, const std::string& key, double fallback) {
    const toml::Value* v = find(sec, key);
    if (!v) return fallback;
    if (v->kind != toml::Value::Kind::number)
      toml::fail(tbl.source, v->line, strfmt("'%s' must be a number", key.c_str()));
    return v->d;
  }

  int integer(const std::string& sec, const std::string& key, int fallback) {
    const toml::Value* v = find(sec, key);
    if (!v) return fallback;
    if (v->kind != toml::Value::Kind::number || v->d != std::floor(v->d))
      toml::fail(tbl.source, v->line, strfmt("'%s' must be an integer", key.c_str()));
    return static_cast<int>(v->d);
  }

  std::string text(const std::string& sec, const std::string& key, const std::string& fallback) {
    const toml::Value* v = find(sec, key);
    if (!v) return fallback;
    if (v->kind != toml::Value::Kind::string)
      toml::fail(tbl.source, v->line, strfmt("'%s' must be a quoted string", key.c_str()));
    return v->s;
  }

  bool boolean(const std::string& sec, const std::string& key, bool fallback) {
    const toml::Value* v = find(sec, key);
    if (!v) return fallback;
    if (v->kind != toml::Value::Kind::boolean)
      toml::fail(tbl.source, v->line, strfmt("'%s' must be true or false", key.c_str()));
    return v->b;
  }

  std::vector<double> array(const std::string& sec, const std::string& key,
                            std::vector<double> fallback) {
    const toml::Value* v = find(sec, key);
    if (!v) return fallback;
    if (v->kind != toml::Value::Kind::array)
      toml::fail(tbl.source, v->line, strfmt("'%s' must be an array of numbers", key.c_str()));
    return v->arr;
  }

  void reject_unknown() {
    for (const auto& [sec, keys] : tbl.sections) {
      for (const auto& [key, val] : keys) {
        if (!consumed.count(sec + "." + key))
          toml::fail(tbl.source, val.line,
                     strfmt("unknown key '%s' in [%s]", key.c_str(), sec.c_str()));
      }
    }
  }
};

}  // namespace detail

inline std::vector<double> default_config_rho_grid() {
  std::vector<double> g;
  for (int j = 0; j <= 6; ++j) g.push_back(0.1 * std::pow(2.0, -j));
  return g;
}

/// Parses and fully validates an experiment configuration. Every diagnostic
/// carries file:line; no compute happens before validation completes.
///
/// strict_cfl = false skips the stability bound on cfl_factor (the positivity
/// check stays). The verify command loads configs this way so that a
/// destabilized factor reaches the forward criterion and is reported as a
/// criterion failure instead of a config rejection.
inline ExperimentConfig config_from_text(const std::string& text, const std::string& source_name,
                                         bool strict_cfl = true) {
  toml::Table tbl = toml::parse(text, source_name);
  detail::ConfigReader r{tbl, {}};
  ExperimentConfig cfg;

  cfg.dim = r.integer("domain", "dim", 1);
  int dim_line = 0;
  if (const toml::Value* v = r.find("domain", "dim")) dim_line = v->line;
  if (cfg.dim != 1 && cfg.dim != 2)
    toml::fail(tbl.source, dim_line, strfmt("dim must be 1 or 2, got %d", cfg.dim));
  cfg.nx = r.integer("domain", "nx", 256);
  cfg.ny = r.integer("domain", "ny", cfg.nx);
  auto check_cells = [&](const char* name, int n) {
    if (n < 8) {
      const toml::Value* v = r.find("domain", name);
      toml::fail(tbl.source, v ? v->line : 0, strfmt("%s must be at least 8, got %d", name, n));
    }
  };
  check_cells("nx", cfg.nx);
  if (cfg.dim == 2) check_cells("ny", cfg.ny);

  cfg.tau = r.number("time", "tau", 2.0);
  if (cfg.tau <= 0.0) {
    const toml::Value* v = r.find("time", "tau");
    toml::fail(tbl.source, v ? v->line : 0, "tau must be positive");
  }
  cfg.cfl_factor = r.number("time", "cfl_factor", 0.0);
  if (const toml::Value* v = r.find("time", "cfl_factor"); v && cfg.cfl_factor <= 0.0)
    toml::fail(tbl.source, v->line,
               strfmt("cfl_factor must be positive, got %s", format_g17(cfg.cfl_factor).c_str()));
  if (const toml::Value* v = r.find("time", "cfl_factor");
      v && strict_cfl && cfg.cfl_factor > 1.0)
    toml::fail(tbl.source, v->line,
               strfmt("cfl_factor must lie in (0, 1], got %s", format_g17(cfg.cfl_factor).c_str()));

  cfg.damping.profile = r.text("damping", "profile", "constant");
  const toml::Value* prof = r.find("damping", "profile");
  int prof_line = prof ? prof->line : 0;
  const std::string& p = cfg.damping.profile;
  if (p != "constant" && p != "bump" && p != "piecewise" && p != "sine")
    toml::fail(tbl.source, prof_line,
               strfmt("unknown damping profile '%s' (constant, bump, piecewise, sine)", p.c_str()));
  if (cfg.dim == 1 && p != "constant")
    toml::fail(tbl.source, prof_line,
               strfmt("profile '%s' needs dim = 2; the 1-D boundary is a single point", p.c_str()));
  if (p == "constant") {
    cfg.damping.level = r.number("damping", "level", 0.5);
    if (cfg.damping.level < 0.0) {
      const toml::Value* v = r.find("damping", "level");
      toml::fail(tbl.source, v ? v->line : 0, "damping level must be nonnegative");
    }
  } else if (p == "bump") {
    cfg.damping.center = r.number("damping", "center", 0.5);
    cfg.damping.width = r.number("damping", "width", 0.25);
    cfg.damping.height = r.number("damping", "height", 0.5);
    if (cfg.damping.height < 0.0 || cfg.damping.width <= 0.0 ||
        cfg.damping.center - cfg.damping.width <= 0.0 ||
        cfg.damping.center + cfg.damping.width >= 1.0)
      toml::fail(tbl.source, prof_line,
                 "bump must have height >= 0 and support strictly inside (0, 1)");
  } else if (p == "piecewise") {
    cfg.damping.breaks = r.array("damping", "breaks", {});
    cfg.damping.levels = r.array("damping", "levels", {});
    if (cfg.damping.levels.size() != cfg.damping.breaks.size() + 1)
      toml::fail(tbl.source, prof_line, "piecewise needs levels.size() == breaks.size() + 1");
    for (size_t i = 0; i < cfg.damping.breaks.size(); ++i) {
      double bk = cfg.damping.breaks[i];
      if (bk <= 0.0 || bk >= 1.0 || (i > 0 && bk <= cfg.damping.breaks[i - 1]))
        toml::fail(tbl.source, prof_line, "breaks must be strictly increasing inside (0, 1)");
    }
    for (double lv : cfg.damping.levels)
      if (lv < 0.0) toml::fail(tbl.source, prof_line, "piecewise levels must be nonnegative");
  } else {
    cfg.damping.offset = r.number("damping", "offset", 0.3);
    cfg.damping.amplitude = r.number("damping", "amplitude", 0.2);
    if (cfg.damping.offset < 0.0 || cfg.damping.offset + std::min(0.0, cfg.damping.amplitude) < 0.0)
      toml::fail(tbl.source, prof_line, "sine profile must stay nonnegative on (0, 1)");
  }

  cfg.mode = r.integer("initial", "mode", 0);
  if (cfg.mode < 0) {
    const toml::Value* v = r.find("initial", "mode");
    toml::fail(tbl.source, v ? v->line : 0, "mode must be nonnegative");
  }

  cfg.rho_grid = r.array("sweep", "rho", default_config_rho_grid());
  const toml::Value* rv = r.find("sweep", "rho");
  int rho_line = rv ? rv->line : 0;
  if (cfg.rho_grid.empty()) toml::fail(tbl.source, rho_line, "sweep rho grid is empty");
  for (size_t i = 0; i < cfg.rho_grid.size(); ++i) {
    if (cfg.rho_grid[i] <= 0.0 || cfg.rho_grid[i] > 1.0)
      toml::fail(tbl.source, rho_line, "sweep rho values must lie in (0, 1]");
    if (i > 0 && cfg.rho_grid[i] >= cfg.rho_grid[i - 1])
      toml::fail(tbl.source, rho_line, "sweep rho values must be strictly decreasing");
  }

  cfg.recon_rho = r.number("reconstruct", "rho", 0.01);
  if (cfg.recon_rho <= 0.0 || cfg.recon_rho > 1.0) {
    const toml::Value* v = r.find("reconstruct", "rho");
    toml::fail(tbl.source, v ? v->line : 0, "reconstruct rho must lie in (0, 1]");
  }
  cfg.ridge = r.number("reconstruct", "ridge", 0.0);
  if (cfg.ridge < 0.0) {
    const toml::Value* v = r.find("reconstruct", "ridge");
    toml::fail(tbl.source, v ? v->line : 0, "ridge must be nonnegative");
  }

  cfg.noise_level = r.number("noise", "level", 0.0);
  if (cfg.noise_level < 0.0) {
    const toml::Value* v = r.find("noise", "level");
    toml::fail(tbl.source, v ? v->line : 0, "noise level must be nonnegative");
  }
  double seed_d = r.number("noise", "seed", static_cast<double>(cfg.seed));
  if (seed_d < 0.0 || seed_d != std::floor(seed_d)) {
    const toml::Value* v = r.find("noise", "seed");
    toml::fail(tbl.source, v ? v->line : 0, "seed must be a nonnegative integer");
  }
  cfg.seed = static_cast<uint64_t>(seed_d);

  cfg.out_dir = r.text("output", "dir", "out");
  cfg.dump = r.boolean("output", "dump", false);

  r.reject_unknown();

  if (strict_cfl) {
    // CFL feasibility is checked here so a broken config never reaches a solver
    DomainMesh mesh = cfg.make_mesh();
    TimeGrid tg = cfg.make_time(mesh);
    double s = 1.0 / (mesh.hx * mesh.hx);
    if (mesh.dim == 2) s += 1.0 / (mesh.hy * mesh.hy);
    if (tg.dt * tg.dt * s > 1.0)
      throw config_error(strfmt("%s: cfl_factor %s yields an unstable time step",
                                tbl.source.c_str(), format_g17(cfg.cfl_factor).c_str()));
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, bool strict_cfl = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_text(ss.str(), path, strict_cfl);
}

}  // namespace dwinv
