#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nslg/energetics.hpp"
#include "nslg/params.hpp"
#include "nslg/state.hpp"
#include "nslg/stepper.hpp"

namespace nslg {

// ---------------------------------------------------------------- config

enum class ModelKind { full, perturb };
enum class InitialKind { equilibrium, random, manufactured, snapshot };
enum class FieldKind { zero, constant, file };

struct InitialSpec {
  InitialKind kind = InitialKind::equilibrium;
  double amplitude = 1e-2;
  std::uint64_t seed = 1;
  int max_mode = 3;
  bool compatible = true;
  std::string name = "wave";
  std::string path;
  Vec3 M_e{0, 0, 1};
};

struct FieldSpec {
  FieldKind kind = FieldKind::zero;
  Vec3 value{0, 0, 0};
  std::string path;
};

struct RunConfig {
  ModelKind model = ModelKind::full;
  int dim = 2;
  std::array<int, 3> n{32, 32, 32};
  Params params;
  Tolerances tol;
  InitialSpec initial;
  FieldSpec field;
  StepConfig step;
  double T_end = 0.0;
  int sample_every = 1;
  std::string output = "out";
  bool deterministic = false;
  int sobolev_order = 2;
  CoeffChoice coeff{0.01, 1e-3, 10.0};
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string key, const std::string& what)
      : std::runtime_error(format(line, key, what)), line_(line), key_(std::move(key)) {}
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  static std::string format(int line, const std::string& key, const std::string& what) {
    std::string s = "config";
    if (line > 0) s += " line " + std::to_string(line);
    if (!key.empty()) s += " [" + key + "]";
    return s + ": " + what;
  }
  int line_;
  std::string key_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto a = s.find_first_not_of(ws);
  if (a == std::string_view::npos) return {};
  auto b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto c = s.find(',', start);
    out.push_back(trim(s.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start)));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

inline double parse_double(std::string_view v) {
  double x = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) throw std::invalid_argument("expected a number, got '" + std::string(v) + "'");
  return x;
}

template <class Int>
Int parse_int(std::string_view v) {
  Int x = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) throw std::invalid_argument("expected an integer, got '" + std::string(v) + "'");
  return x;
}

inline bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(v) + "'");
}

inline Vec3 parse_vec3(std::string_view v) {
  auto parts = split_list(v);
  if (parts.size() != 3) throw std::invalid_argument("expected three comma-separated numbers");
  return {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])};
}

template <class E>
E parse_enum(std::string_view v, std::initializer_list<std::pair<const char*, E>> opts) {
  std::string allowed;
  for (const auto& [name, e] : opts) {
    if (v == name) return e;
    allowed += allowed.empty() ? name : std::string(" | ") + name;
  }
  throw std::invalid_argument("expected one of " + allowed + ", got '" + std::string(v) + "'");
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

inline const std::map<std::string, Setter>& config_keys() {
  static const std::map<std::string, Setter> keys = [] {
    std::map<std::string, Setter> k;
    k["model"] = [](RunConfig& c, std::string_view v) {
      c.model = parse_enum<ModelKind>(v, {{"full", ModelKind::full}, {"perturb", ModelKind::perturb}});
    };
    k["T_end"] = [](RunConfig& c, std::string_view v) { c.T_end = parse_double(v); };
    k["dt"] = [](RunConfig& c, std::string_view v) { c.step.dt = parse_double(v); };
    k["sample_every"] = [](RunConfig& c, std::string_view v) { c.sample_every = parse_int<int>(v); };
    k["output"] = [](RunConfig& c, std::string_view v) { c.output = std::string(v); };
    k["deterministic"] = [](RunConfig& c, std::string_view v) { c.deterministic = parse_bool(v); };

    k["grid.dim"] = [](RunConfig& c, std::string_view v) { c.dim = parse_int<int>(v); };
    k["grid.n"] = [](RunConfig& c, std::string_view v) {
      auto parts = split_list(v);
      if (parts.size() > 3) throw std::invalid_argument("at most three axis sizes");
      for (std::size_t a = 0; a < 3; ++a) c.n[a] = parse_int<int>(parts[std::min(a, parts.size() - 1)]);
    };

    k["params.a"] = [](RunConfig& c, std::string_view v) { c.params.a = parse_double(v); };
    k["params.gamma_p"] = [](RunConfig& c, std::string_view v) { c.params.gamma_p = parse_double(v); };
    k["params.A"] = [](RunConfig& c, std::string_view v) { c.params.A = parse_double(v); };
    k["params.lambda_d"] = [](RunConfig& c, std::string_view v) { c.params.lambda_d = parse_double(v); };
    k["params.gamma_g"] = [](RunConfig& c, std::string_view v) { c.params.gamma_g = parse_double(v); };
    k["params.mu"] = [](RunConfig& c, std::string_view v) { c.params.mu = parse_double(v); };
    k["params.xi"] = [](RunConfig& c, std::string_view v) { c.params.xi = parse_double(v); };
    k["params.mu0"] = [](RunConfig& c, std::string_view v) { c.params.mu0 = parse_double(v); };

    k["initial.kind"] = [](RunConfig& c, std::string_view v) {
      c.initial.kind = parse_enum<InitialKind>(v, {{"equilibrium", InitialKind::equilibrium},
                                                   {"random", InitialKind::random},
                                                   {"manufactured", InitialKind::manufactured},
                                                   {"snapshot", InitialKind::snapshot}});
    };
    k["initial.amplitude"] = [](RunConfig& c, std::string_view v) { c.initial.amplitude = parse_double(v); };
    k["initial.seed"] = [](RunConfig& c, std::string_view v) { c.initial.seed = parse_int<std::uint64_t>(v); };
    k["initial.max_mode"] = [](RunConfig& c, std::string_view v) { c.initial.max_mode = parse_int<int>(v); };
    k["initial.compatible"] = [](RunConfig& c, std::string_view v) { c.initial.compatible = parse_bool(v); };
    k["initial.name"] = [](RunConfig& c, std::string_view v) { c.initial.name = std::string(v); };
    k["initial.path"] = [](RunConfig& c, std::string_view v) { c.initial.path = std::string(v); };
    k["initial.M_e"] = [](RunConfig& c, std::string_view v) { c.initial.M_e = parse_vec3(v); };

    k["field.kind"] = [](RunConfig& c, std::string_view v) {
      c.field.kind = parse_enum<FieldKind>(v, {{"zero", FieldKind::zero}, {"constant", FieldKind::constant}, {"file", FieldKind::file}});
    };
    k["field.value"] = [](RunConfig& c, std::string_view v) { c.field.value = parse_vec3(v); };
    k["field.path"] = [](RunConfig& c, std::string_view v) { c.field.path = std::string(v); };

    k["step.scheme"] = [](RunConfig& c, std::string_view v) {
      c.step.scheme = parse_enum<Scheme>(v, {{"rk4", Scheme::rk4}, {"picard", Scheme::picard}});
    };
    k["step.cfl_safety"] = [](RunConfig& c, std::string_view v) { c.step.cfl_safety = parse_double(v); };
    k["step.picard_tol"] = [](RunConfig& c, std::string_view v) { c.step.picard_tol = parse_double(v); };
    k["step.picard_max_iters"] = [](RunConfig& c, std::string_view v) { c.step.picard_max_iters = parse_int<int>(v); };
    k["step.renormalize_M"] = [](RunConfig& c, std::string_view v) { c.step.renormalize_M = parse_bool(v); };

    k["diagnostics.sobolev_order"] = [](RunConfig& c, std::string_view v) { c.sobolev_order = parse_int<int>(v); };
    k["diagnostics.delta"] = [](RunConfig& c, std::string_view v) { c.coeff.delta = parse_double(v); };
    k["diagnostics.eta"] = [](RunConfig& c, std::string_view v) { c.coeff.eta = parse_double(v); };
    k["diagnostics.epsilon"] = [](RunConfig& c, std::string_view v) { c.coeff.epsilon = parse_double(v); };
    k["diagnostics.sphere_tol"] = [](RunConfig& c, std::string_view v) { c.tol.sphere_tol = parse_double(v); };
    k["diagnostics.det_floor"] = [](RunConfig& c, std::string_view v) { c.tol.det_floor = parse_double(v); };
    return k;
  }();
  return keys;
}

}  // namespace detail

// cross-field checks; throws ConfigError naming the key path
inline void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(0, key, what); };
  if (c.dim < 1 || c.dim > 3) fail("grid.dim", "must be 1, 2 or 3");
  for (int a = 0; a < c.dim; ++a)
    if (c.n[a] < 8 || c.n[a] % 2 != 0) fail("grid.n", "each axis size must be even and >= 8");
  for (const auto& v : validate_params(c.params)) fail("params", "violates " + v);
  if (!(c.T_end > 0.0)) fail("T_end", "must be > 0");
  if (!(c.step.dt > 0.0)) fail("dt", "must be > 0");
  if (c.sample_every < 1) fail("sample_every", "must be >= 1");
  if (!(c.step.cfl_safety > 0.0)) fail("step.cfl_safety", "must be > 0");
  if (!(c.step.picard_tol > 0.0)) fail("step.picard_tol", "must be > 0");
  if (c.step.picard_max_iters < 1) fail("step.picard_max_iters", "must be >= 1");
  if (c.sobolev_order < 1 || c.sobolev_order > kMaxSobolevOrder) fail("diagnostics.sobolev_order", "must lie in 1..6");
  if (std::abs(norm(c.initial.M_e) - 1.0) > 1e-12) fail("initial.M_e", "must be a unit vector");
  if (c.initial.kind == InitialKind::random && !(c.initial.amplitude >= 0.0)) fail("initial.amplitude", "must be >= 0");
  if (c.initial.kind == InitialKind::random && c.initial.max_mode < 1) fail("initial.max_mode", "must be >= 1");
  if (c.initial.kind == InitialKind::snapshot && c.initial.path.empty()) fail("initial.path", "required for snapshot initial data");
  if (c.field.kind == FieldKind::file && c.field.path.empty()) fail("field.path", "required for field.kind = file");
  if (c.model == ModelKind::perturb) {
    bool nonzero = c.field.kind == FieldKind::file ||
                   (c.field.kind == FieldKind::constant && (c.field.value[0] != 0 || c.field.value[1] != 0 || c.field.value[2] != 0));
    if (nonzero) fail("field", "perturb model forbids nonzero H_ext");
    if (c.step.scheme == Scheme::picard) fail("step.scheme", "picard is available for the full model only");
  }
}

inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::set<std::string> seen;
  std::string section;
  const auto& keys = detail::config_keys();
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    auto hash = raw.find('#');
    std::string_view line = detail::trim(raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "", "unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError(line_no, "", "empty section name");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "", "expected 'key = value'");
    std::string key(detail::trim(line.substr(0, eq)));
    std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "", "missing key");
    std::string path = section.empty() ? key : section + "." + key;
    auto it = keys.find(path);
    if (it == keys.end()) throw ConfigError(line_no, path, "unknown key");
    if (!seen.insert(path).second) throw ConfigError(line_no, path, "duplicate key");
    try {
      it->second(c, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line_no, path, e.what());
    }
  }
  for (const char* req : {"model", "grid.dim", "grid.n", "T_end", "dt"})
    if (!seen.count(req)) throw ConfigError(0, req, "required key missing");
  validate_config(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------- series

inline const std::vector<std::string>& series_columns() {
  static const std::vector<std::string> cols{"t",         "E_total",   "K",          "F_helm",     "D_total",    "Es_local",
                                             "Ds_local",  "Es_global", "Ds_global",  "E_instant",  "D_instant",  "res_sphere",
                                             "res_det",   "res_curl",  "res_compat", "dbar_x",     "dbar_y",     "dbar_z"};
  return cols;
}

// shortest decimal that reads back to the same double
inline std::string format_real(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline void write_series(std::ostream& out, const std::vector<FunctionalSample>& samples) {
  const auto& cols = series_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& s : samples) {
    const double row[] = {s.t,         s.E_total,   s.K,          s.F_helm,     s.D_total,  s.Es_local,
                          s.Ds_local,  s.Es_global, s.Ds_global,  s.E_instant,  s.D_instant, s.res_sphere,
                          s.res_det,   s.res_curl,  s.res_compat, s.dbar[0],    s.dbar[1],  s.dbar[2]};
    for (std::size_t i = 0; i < std::size(row); ++i) out << (i ? "," : "") << format_real(row[i]);
    out << '\n';
  }
}

inline void write_series(const std::string& path, const std::vector<FunctionalSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_series(out, samples);
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------- snapshots

inline constexpr char kSnapshotMagic[4] = {'N', 'S', 'L', 'G'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

enum class ModelTag : std::uint8_t { field = 0, full = 1, perturb = 2 };

enum class SnapshotErrorKind { io, bad_magic, bad_version, truncated, malformed };

class SnapshotError : public std::runtime_error {
 public:
  SnapshotError(SnapshotErrorKind k, const std::string& what) : std::runtime_error("snapshot: " + what), kind_(k) {}
  SnapshotErrorKind kind() const noexcept { return kind_; }

 private:
  SnapshotErrorKind kind_;
};

struct SnapshotField {
  std::string name;
  std::uint8_t rank = 0;  // 0 scalar, 1 vector, 2 matrix
  std::vector<double> values;
};

struct Snapshot {
  ModelTag model = ModelTag::field;
  int dim = 0;
  std::array<int, 3> n{1, 1, 1};
  std::vector<SnapshotField> fields;

  std::size_t points() const {
    std::size_t p = 1;
    for (int a = 0; a < dim; ++a) p *= static_cast<std::size_t>(n[a]);
    return p;
  }
  const SnapshotField& field(const std::string& name) const {
    for (const auto& f : fields)
      if (f.name == name) return f;
    throw SnapshotError(SnapshotErrorKind::malformed, "missing field " + name);
  }
};

inline std::size_t rank_components(std::uint8_t rank) {
  switch (rank) {
    case 0: return 1;
    case 1: return 3;
    case 2: return 9;
  }
  throw SnapshotError(SnapshotErrorKind::malformed, "rank code " + std::to_string(rank));
}

namespace detail {

inline void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& b, double x) {
  auto v = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  std::string_view b;
  std::size_t pos = 0;
  bool has(std::size_t k) const { return b.size() - pos >= k; }
  std::uint8_t u8() { return static_cast<std::uint8_t>(b[pos++]); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
};

template <std::size_t NC>
SnapshotField pack(const std::string& name, const Field<NC>& f) {
  SnapshotField s;
  s.name = name;
  s.rank = NC == 1 ? 0 : NC == 3 ? 1 : 2;
  s.values.resize(f.points() * NC);
  for (std::size_t q = 0; q < f.points(); ++q)
    for (std::size_t c = 0; c < NC; ++c) s.values[q * NC + c] = f.c[c][q];
  return s;
}

template <std::size_t NC>
Field<NC> unpack(const Grid& g, const SnapshotField& s) {
  if (rank_components(s.rank) != NC || s.values.size() != g.size() * NC)
    throw SnapshotError(SnapshotErrorKind::malformed, "field " + s.name + " has the wrong shape");
  Field<NC> f(g);
  for (std::size_t q = 0; q < g.size(); ++q)
    for (std::size_t c = 0; c < NC; ++c) f.c[c][q] = s.values[q * NC + c];
  return f;
}

inline Snapshot header_of(ModelTag tag, const Grid& g) {
  Snapshot s;
  s.model = tag;
  s.dim = g.dim();
  for (int a = 0; a < g.dim(); ++a) s.n[a] = g.n(a);
  return s;
}

}  // namespace detail

inline Snapshot to_snapshot(const FullState& s) {
  Snapshot out = detail::header_of(ModelTag::full, s.grid());
  out.fields = {detail::pack("rho", s.rho), detail::pack("v", s.v), detail::pack("F", s.F), detail::pack("M", s.M)};
  return out;
}

inline Snapshot to_snapshot(const PerturbState& s) {
  Snapshot out = detail::header_of(ModelTag::perturb, s.grid());
  VectorField me(s.grid());
  for (int i = 0; i < 3; ++i) me.c[i].assign(s.grid().size(), s.M_e[i]);
  out.fields = {detail::pack("theta", s.theta), detail::pack("u", s.u), detail::pack("psi", s.psi), detail::pack("d", s.d),
                detail::pack("M_e", me)};
  return out;
}

inline std::string encode_snapshot(const Snapshot& s) {
  std::string b(kSnapshotMagic, 4);
  detail::put_u32(b, kSnapshotVersion);
  b.push_back(static_cast<char>(s.model));
  b.push_back(static_cast<char>(s.dim));
  for (int a = 0; a < s.dim; ++a) detail::put_u32(b, static_cast<std::uint32_t>(s.n[a]));
  detail::put_u32(b, static_cast<std::uint32_t>(s.fields.size()));
  for (const auto& f : s.fields) {
    detail::put_u32(b, static_cast<std::uint32_t>(f.name.size()));
    b += f.name;
    b.push_back(static_cast<char>(f.rank));
    for (double x : f.values) detail::put_f64(b, x);
  }
  return b;
}

inline Snapshot decode_snapshot(std::string_view bytes) {
  using K = SnapshotErrorKind;
  detail::Reader r{bytes};
  if (!r.has(4) || bytes.substr(0, 4) != std::string_view(kSnapshotMagic, 4)) throw SnapshotError(K::bad_magic, "bad magic bytes");
  r.pos = 4;
  if (!r.has(4)) throw SnapshotError(K::truncated, "truncation in header");
  std::uint32_t ver = r.u32();
  if (ver != kSnapshotVersion) throw SnapshotError(K::bad_version, "unsupported format version " + std::to_string(ver));
  if (!r.has(2)) throw SnapshotError(K::truncated, "truncation in header");
  Snapshot s;
  std::uint8_t tag = r.u8();
  if (tag > 2) throw SnapshotError(K::malformed, "unknown model tag " + std::to_string(tag));
  s.model = static_cast<ModelTag>(tag);
  s.dim = r.u8();
  if (s.dim < 1 || s.dim > 3) throw SnapshotError(K::malformed, "dim " + std::to_string(s.dim));
  if (!r.has(4 * static_cast<std::size_t>(s.dim) + 4)) throw SnapshotError(K::truncated, "truncation in header");
  for (int a = 0; a < s.dim; ++a) s.n[a] = static_cast<int>(r.u32());
  std::uint32_t count = r.u32();
  const std::size_t pts = s.points();
  for (std::uint32_t k = 0; k < count; ++k) {
    auto trunc = [k] { return SnapshotError(K::truncated, "truncation at field " + std::to_string(k)); };
    if (!r.has(4)) throw trunc();
    std::uint32_t len = r.u32();
    if (!r.has(static_cast<std::size_t>(len) + 1)) throw trunc();
    SnapshotField f;
    f.name = std::string(bytes.substr(r.pos, len));
    r.pos += len;
    f.rank = r.u8();
    std::size_t nv = pts * rank_components(f.rank);
    if (!r.has(8 * nv)) throw trunc();
    f.values.resize(nv);
    for (auto& x : f.values) x = r.f64();
    s.fields.push_back(std::move(f));
  }
  if (r.pos != bytes.size()) throw SnapshotError(K::malformed, "trailing bytes after field " + std::to_string(count));
  return s;
}

inline void write_snapshot(const std::string& path, const Snapshot& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SnapshotError(SnapshotErrorKind::io, "cannot write " + path);
  std::string b = encode_snapshot(s);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw SnapshotError(SnapshotErrorKind::io, "write failed: " + path);
}

template <class State>
void write_snapshot(const std::string& path, const State& s) {
  write_snapshot(path, to_snapshot(s));
}

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError(SnapshotErrorKind::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_snapshot(ss.str());
}

inline Grid grid_of(const Snapshot& s) { return Grid(s.dim, s.n); }

inline FullState full_from_snapshot(const Snapshot& s, const Grid& g) {
  if (s.model != ModelTag::full) throw SnapshotError(SnapshotErrorKind::malformed, "not a full-model snapshot");
  return {detail::unpack<1>(g, s.field("rho")), detail::unpack<3>(g, s.field("v")), detail::unpack<9>(g, s.field("F")),
          detail::unpack<3>(g, s.field("M"))};
}

inline PerturbState perturb_from_snapshot(const Snapshot& s, const Grid& g) {
  if (s.model != ModelTag::perturb) throw SnapshotError(SnapshotErrorKind::malformed, "not a perturbation snapshot");
  PerturbState p{detail::unpack<1>(g, s.field("theta")), detail::unpack<3>(g, s.field("u")), detail::unpack<3>(g, s.field("psi")),
                 detail::unpack<3>(g, s.field("d"))};
  const auto& me = s.field("M_e");
  if (me.rank != 1 || me.values.size() < 3) throw SnapshotError(SnapshotErrorKind::malformed, "field M_e has the wrong shape");
  p.M_e = {me.values[0], me.values[1], me.values[2]};
  return p;
}

// external field file: a snapshot with a rank-1 field named H
inline Snapshot field_snapshot(const VectorField& H) {
  Snapshot s = detail::header_of(ModelTag::field, H.grid);
  s.fields = {detail::pack("H", H)};
  return s;
}

inline VectorField field_from_snapshot(const Snapshot& s, const Grid& g) { return detail::unpack<3>(g, s.field("H")); }

}  // namespace nslg
