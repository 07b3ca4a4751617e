#include "nonlocal/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace nonlocal {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& message) { errors.push_back(path + ": " + message); }

  // True when `n` is a map; reports keys outside `allowed`.
  bool map(const YAML::Node& n, const std::string& path, const std::set<std::string>& allowed) {
    if (!n || n.IsNull()) {
      fail(path, "missing section");
      return false;
    }
    if (!n.IsMap()) {
      fail(path, "expected a mapping");
      return false;
    }
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(child(path, key), "unknown key");
    }
    return true;
  }

  template <typename T>
  bool get(const YAML::Node& parent, const std::string& path, const std::string& key, T& out,
           bool required = false) {
    const YAML::Node n = parent[key];
    if (!n) {
      if (required) fail(child(path, key), "missing required key");
      return false;
    }
    try {
      out = n.as<T>();
      return true;
    } catch (const YAML::Exception&) {
      fail(child(path, key), "cannot read value '" + scalar_text(n) + "'");
      return false;
    }
  }

  template <typename T>
  bool get_optional(const YAML::Node& parent, const std::string& path, const std::string& key,
                    std::optional<T>& out) {
    T v{};
    if (!get(parent, path, key, v)) return false;
    out = v;
    return true;
  }

  bool get_list(const YAML::Node& parent, const std::string& path, const std::string& key,
                std::vector<double>& out, bool allow_scalar = false) {
    const YAML::Node n = parent[key];
    if (!n) return false;
    if (allow_scalar && n.IsScalar()) {
      double v = 0;
      if (!get(parent, path, key, v)) return false;
      out = {v};
      return true;
    }
    if (!n.IsSequence()) {
      fail(child(path, key), "expected a list of numbers");
      return false;
    }
    std::vector<double> values;
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        values.push_back(n[i].as<double>());
      } catch (const YAML::Exception&) {
        fail(child(path, key) + "[" + std::to_string(i) + "]", "expected a number");
        return false;
      }
    }
    out = std::move(values);
    return true;
  }

  void require(bool ok, const std::string& path, const std::string& message) {
    if (!ok) fail(path, message);
  }

 private:
  static std::string scalar_text(const YAML::Node& n) {
    if (n.IsScalar()) return n.Scalar();
    return n.IsSequence() ? "<list>" : "<mapping>";
  }
};

bool finite(double v) { return std::isfinite(v); }

template <typename E>
bool parse_enum(Reader& r, const YAML::Node& parent, const std::string& path, const std::string& key,
                const std::vector<std::pair<std::string, E>>& names, E& out, bool required) {
  std::string s;
  if (!r.get(parent, path, key, s, required)) return false;
  for (const auto& [name, value] : names) {
    if (name == s) {
      out = value;
      return true;
    }
  }
  std::string allowed;
  for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + name;
  r.fail(child(path, key), "unknown value '" + s + "' (expected one of: " + allowed + ")");
  return false;
}

const std::vector<std::pair<std::string, KernelFamily>> kKernelFamilies = {
    {"uniform", KernelFamily::uniform},
    {"truncated_gaussian", KernelFamily::truncated_gaussian},
    {"tent", KernelFamily::tent}};
const std::vector<std::pair<std::string, Normalization>> kNormalizations = {
    {"global", Normalization::global}, {"none", Normalization::none}};
const std::vector<std::pair<std::string, DecayFamily>> kDecayFamilies = {
    {"constant", DecayFamily::constant}, {"affine", DecayFamily::affine}};
const std::vector<std::pair<std::string, ReactionFamily>> kReactionFamilies = {
    {"zero", ReactionFamily::zero},
    {"saturated_affine", ReactionFamily::saturated_affine},
    {"linear_saturated", ReactionFamily::linear_saturated}};
const std::vector<std::pair<std::string, GainFamily>> kGainFamilies = {
    {"zero", GainFamily::zero}, {"linear", GainFamily::linear}, {"scaled_tanh", GainFamily::scaled_tanh}};
const std::vector<std::pair<std::string, Scheme>> kSchemes = {{"etd", Scheme::etd}, {"rk4", Scheme::rk4}};

template <typename E>
std::string enum_name(const std::vector<std::pair<std::string, E>>& names, E v) {
  for (const auto& [name, value] : names)
    if (value == v) return name;
  return "?";
}

const std::set<std::string> kKernelKeys = {"family", "amplitude", "sigma", "radius", "normalization"};

void parse_kernel_spec(Reader& r, const YAML::Node& n, const std::string& path, KernelSpec<double>& k) {
  parse_enum(r, n, path, "family", kKernelFamilies, k.family, true);
  r.get(n, path, "amplitude", k.amplitude);
  r.get(n, path, "sigma", k.sigma);
  const bool has_radius = r.get(n, path, "radius", k.radius);
  parse_enum(r, n, path, "normalization", kNormalizations, k.normalization, false);
  if (!has_radius) {
    if (k.family == KernelFamily::uniform) k.radius = std::numeric_limits<double>::infinity();
    if (k.family == KernelFamily::truncated_gaussian) k.radius = 4 * k.sigma;
  }
  r.require(finite(k.amplitude) && k.amplitude >= 0, child(path, "amplitude"), "must be finite and >= 0");
  r.require(k.radius > 0 && !std::isnan(k.radius), child(path, "radius"), "must be positive");
  r.require(k.family == KernelFamily::uniform || finite(k.radius), child(path, "radius"),
            "must be finite for this family");
  r.require(finite(k.sigma) && k.sigma > 0, child(path, "sigma"), "must be positive");
}

void parse_grid(Reader& r, const YAML::Node& root, GridSection& g) {
  const std::string path = "grid";
  const YAML::Node n = root[path];
  if (!r.map(n, path, {"dimension", "bounds", "nodes_per_axis"})) return;
  r.get(n, path, "dimension", g.dimension, true);
  r.get(n, path, "nodes_per_axis", g.nodes_per_axis, true);
  r.require(g.dimension == 1 || g.dimension == 2, child(path, "dimension"), "must be 1 or 2");
  r.require(g.nodes_per_axis >= 2, child(path, "nodes_per_axis"), "must be >= 2");

  const YAML::Node b = n["bounds"];
  const std::string bpath = child(path, "bounds");
  if (!b) {
    r.fail(bpath, "missing required key");
    return;
  }
  if (!b.IsSequence()) {
    r.fail(bpath, "expected a list of [lower, upper] pairs");
    return;
  }
  g.bounds.clear();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::string ipath = bpath + "[" + std::to_string(i) + "]";
    try {
      const auto pair = b[i].as<std::vector<double>>();
      if (pair.size() != 2) {
        r.fail(ipath, "expected [lower, upper]");
        continue;
      }
      r.require(finite(pair[0]) && finite(pair[1]) && pair[0] < pair[1], ipath, "need finite lower < upper");
      g.bounds.push_back({pair[0], pair[1]});
    } catch (const YAML::Exception&) {
      r.fail(ipath, "expected [lower, upper]");
    }
  }
  r.require(static_cast<int>(b.size()) == g.dimension, bpath,
            "expected " + std::to_string(g.dimension) + " intervals, got " + std::to_string(b.size()));
}

void parse_kernel(Reader& r, const YAML::Node& root, KernelSection& k) {
  const std::string path = "kernel";
  const YAML::Node n = root[path];
  auto keys = kKernelKeys;
  keys.insert("renormalize_rows");
  if (!r.map(n, path, keys)) return;
  parse_kernel_spec(r, n, path, k.spec);
  r.get(n, path, "renormalize_rows", k.renormalize_rows);
}

void parse_model(Reader& r, const YAML::Node& root, ModelSection& m) {
  const std::string path = "model";
  const YAML::Node n = root[path];
  if (!r.map(n, path, {"decay", "reaction", "gain", "p", "delta", "mu", "gradient_diagnostics"})) return;

  const std::string dpath = child(path, "decay");
  if (r.map(n["decay"], dpath, {"family", "h0", "h1"})) {
    parse_enum(r, n["decay"], dpath, "family", kDecayFamilies, m.decay.family, true);
    r.get(n["decay"], dpath, "h0", m.decay.h0, true);
    r.get(n["decay"], dpath, "h1", m.decay.h1);
    r.require(finite(m.decay.h0) && m.decay.h0 > 0, child(dpath, "h0"), "must be positive");
    r.require(finite(m.decay.h1) && m.decay.h1 >= 0, child(dpath, "h1"), "must be >= 0");
  }

  const std::string fpath = child(path, "reaction");
  const YAML::Node f = n["reaction"];
  if (r.map(f, fpath, {"family", "alpha", "alpha_slope", "a", "beta", "beta_slope", "beta_cos", "beta_freq", "k_f", "c_f"})) {
    auto& s = m.reaction;
    parse_enum(r, f, fpath, "family", kReactionFamilies, s.family, true);
    r.get(f, fpath, "alpha", s.alpha);
    r.get(f, fpath, "alpha_slope", s.alpha_slope);
    r.get(f, fpath, "a", s.a);
    r.get(f, fpath, "beta", s.beta);
    r.get(f, fpath, "beta_slope", s.beta_slope);
    r.get(f, fpath, "beta_cos", s.beta_cos);
    r.get(f, fpath, "beta_freq", s.beta_freq);
    r.get(f, fpath, "k_f", s.k_f, true);
    r.get(f, fpath, "c_f", s.c_f, true);
    for (auto [key, v] : {std::pair{"alpha", s.alpha}, {"alpha_slope", s.alpha_slope}, {"a", s.a}, {"beta", s.beta},
                          {"beta_slope", s.beta_slope}, {"beta_cos", s.beta_cos}, {"beta_freq", s.beta_freq}})
      r.require(finite(v), child(fpath, key), "must be finite");
    r.require(finite(s.k_f) && s.k_f >= 0, child(fpath, "k_f"), "must be finite and >= 0");
    r.require(finite(s.c_f) && s.c_f >= 0, child(fpath, "c_f"), "must be finite and >= 0");
  }

  const std::string gpath = child(path, "gain");
  const YAML::Node g = n["gain"];
  if (r.map(g, gpath, {"family", "gamma", "a", "b", "k_g", "c_g"})) {
    auto& s = m.gain;
    parse_enum(r, g, gpath, "family", kGainFamilies, s.family, true);
    r.get(g, gpath, "gamma", s.gamma);
    r.get(g, gpath, "a", s.a);
    r.get(g, gpath, "b", s.b);
    r.get(g, gpath, "k_g", s.k_g, true);
    r.get(g, gpath, "c_g", s.c_g, true);
    for (auto [key, v] : {std::pair{"gamma", s.gamma}, {"a", s.a}, {"b", s.b}})
      r.require(finite(v), child(gpath, key), "must be finite");
    r.require(finite(s.k_g) && s.k_g >= 0, child(gpath, "k_g"), "must be finite and >= 0");
    r.require(finite(s.c_g) && s.c_g >= 0, child(gpath, "c_g"), "must be finite and >= 0");
  }

  r.get_list(n, path, "p", m.p, true);
  r.require(!m.p.empty(), child(path, "p"), "must list at least one exponent");
  for (double p : m.p) r.require(finite(p) && p >= 1, child(path, "p"), "exponents must lie in [1, inf)");
  r.get(n, path, "delta", m.delta);
  r.get(n, path, "mu", m.mu);
  r.get(n, path, "gradient_diagnostics", m.gradient_diagnostics);
  r.require(finite(m.delta) && m.delta > 0, child(path, "delta"), "must be positive");
  r.require(finite(m.mu) && m.mu > 0, child(path, "mu"), "must be positive");
}

void parse_integrator(Reader& r, const YAML::Node& root, IntegratorConfig<double>& c) {
  const std::string path = "integrator";
  const YAML::Node n = root[path];
  if (!r.map(n, path, {"scheme", "dt", "t_end", "record_every", "snapshot_every", "record_gradients"})) return;
  parse_enum(r, n, path, "scheme", kSchemes, c.scheme, false);
  const bool has_dt = r.get(n, path, "dt", c.dt, true);
  const bool has_t = r.get(n, path, "t_end", c.t_end, true);
  std::int64_t every = c.record_every, snap = c.snapshot_every;
  r.get(n, path, "record_every", every);
  r.get(n, path, "snapshot_every", snap);
  c.record_every = every;
  c.snapshot_every = snap;
  r.get(n, path, "record_gradients", c.record_gradients);
  if (has_dt) r.require(finite(c.dt) && c.dt > 0, child(path, "dt"), "must be positive");
  if (has_t) r.require(finite(c.t_end) && c.t_end >= 0, child(path, "t_end"), "must be >= 0");
  if (has_dt && has_t && c.dt > 0 && c.t_end > 0)
    r.require(c.dt <= c.t_end, child(path, "dt"), "must not exceed integrator.t_end");
  r.require(c.record_every >= 1, child(path, "record_every"), "must be >= 1");
  r.require(c.snapshot_every >= 0, child(path, "snapshot_every"), "must be >= 0");
}

void parse_experiment(Reader& r, const YAML::Node& root, ExperimentSection& e) {
  const std::string path = "experiment";
  const YAML::Node n = root[path];
  if (!r.map(n, path,
             {"name", "initial", "trajectories", "ensemble_size", "snapshots_per_member", "burn_in", "spacing",
              "initial_radius", "norm_factor", "perturbation", "levels", "target", "bump", "tolerance_factor",
              "threshold_factor", "linearity_factor", "gradient_tolerance", "start_time"}))
    return;
  if (r.get(n, path, "name", e.name, true)) {
    const auto& names = experiment_names();
    r.require(std::find(names.begin(), names.end(), e.name) != names.end(), child(path, "name"),
              "unknown experiment '" + e.name + "'");
  }

  if (n["initial"]) {
    const std::string ipath = child(path, "initial");
    if (r.map(n["initial"], ipath, {"kind", "amplitude", "frequency", "norm"})) {
      auto& ic = e.initial;
      r.get(n["initial"], ipath, "kind", ic.kind);
      r.get(n["initial"], ipath, "amplitude", ic.amplitude);
      r.get(n["initial"], ipath, "frequency", ic.frequency);
      r.get(n["initial"], ipath, "norm", ic.norm);
      r.require(ic.kind == "random" || ic.kind == "smooth_random" || ic.kind == "constant" || ic.kind == "sine",
                child(ipath, "kind"), "expected one of: random, smooth_random, constant, sine");
      r.require(finite(ic.amplitude) && finite(ic.frequency), ipath, "amplitude and frequency must be finite");
      r.require(finite(ic.norm) && ic.norm >= 0, child(ipath, "norm"), "must be >= 0");
    }
  }

  r.get(n, path, "trajectories", e.trajectories);
  r.get(n, path, "ensemble_size", e.ensemble_size);
  r.get(n, path, "snapshots_per_member", e.snapshots_per_member);
  r.get(n, path, "burn_in", e.burn_in);
  r.get(n, path, "spacing", e.spacing);
  r.get(n, path, "initial_radius", e.initial_radius);
  r.get(n, path, "norm_factor", e.norm_factor);
  r.require(e.trajectories >= 1, child(path, "trajectories"), "must be >= 1");
  r.require(e.ensemble_size >= 1, child(path, "ensemble_size"), "must be >= 1");
  r.require(e.snapshots_per_member >= 1, child(path, "snapshots_per_member"), "must be >= 1");
  r.require(finite(e.burn_in) && e.burn_in >= 0, child(path, "burn_in"), "must be >= 0");
  r.require(finite(e.spacing) && e.spacing > 0, child(path, "spacing"), "must be positive");
  r.require(finite(e.initial_radius) && e.initial_radius >= 0, child(path, "initial_radius"), "must be >= 0");
  r.require(finite(e.norm_factor) && e.norm_factor > 1, child(path, "norm_factor"), "must be > 1");

  if (r.get(n, path, "perturbation", e.perturbation))
    r.require(e.perturbation == "width" || e.perturbation == "mix" || e.perturbation == "bump",
              child(path, "perturbation"), "expected one of: width, mix, bump");
  r.get_list(n, path, "levels", e.levels);
  for (double l : e.levels) r.require(finite(l) && l >= 0, child(path, "levels"), "levels must be finite and >= 0");
  if (n["target"]) {
    const std::string tpath = child(path, "target");
    if (r.map(n["target"], tpath, kKernelKeys)) {
      KernelSpec<double> t;
      parse_kernel_spec(r, n["target"], tpath, t);
      e.target = t;
    }
  }
  if (n["bump"]) {
    const std::string bpath = child(path, "bump");
    if (r.map(n["bump"], bpath, {"center", "width"})) {
      r.get_list(n["bump"], bpath, "center", e.bump_center);
      r.get(n["bump"], bpath, "width", e.bump_width);
      r.require(finite(e.bump_width) && e.bump_width > 0, child(bpath, "width"), "must be positive");
    }
  }
  r.get(n, path, "tolerance_factor", e.tolerance_factor);
  r.get(n, path, "threshold_factor", e.threshold_factor);
  r.get(n, path, "linearity_factor", e.linearity_factor);
  r.get_optional(n, path, "gradient_tolerance", e.gradient_tolerance);
  r.get_optional(n, path, "start_time", e.start_time);
  r.require(finite(e.tolerance_factor) && e.tolerance_factor >= 0, child(path, "tolerance_factor"), "must be >= 0");
  r.require(finite(e.threshold_factor) && e.threshold_factor >= 0, child(path, "threshold_factor"), "must be >= 0");
  r.require(finite(e.linearity_factor) && e.linearity_factor >= 1, child(path, "linearity_factor"), "must be >= 1");
}

void emit_kernel_spec(YAML::Emitter& out, const KernelSpec<double>& k) {
  out << YAML::Key << "family" << YAML::Value << enum_name(kKernelFamilies, k.family);
  out << YAML::Key << "amplitude" << YAML::Value << k.amplitude;
  out << YAML::Key << "sigma" << YAML::Value << k.sigma;
  out << YAML::Key << "radius" << YAML::Value << k.radius;
  out << YAML::Key << "normalization" << YAML::Value << enum_name(kNormalizations, k.normalization);
}

void emit_list(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << x;
  out << YAML::EndSeq;
}

}  // namespace

ConfigErrors::ConfigErrors(std::vector<std::string> errors)
    : ConfigurationError(join_lines(errors)), errors_(std::move(errors)) {}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"validate", "simulate",  "absorb",  "attractor",
                                                 "continuity", "deviation", "gradient"};
  return names;
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigErrors({"<document>: " + std::string(e.what())});
  }
  Reader r;
  RunConfig c;
  if (!root || !root.IsMap()) throw ConfigErrors({"<document>: expected a mapping of sections"});
  r.map(root, "", {"grid", "kernel", "model", "integrator", "experiment", "seed", "output_dir"});
  parse_grid(r, root, c.grid);
  parse_kernel(r, root, c.kernel);
  parse_model(r, root, c.model);
  parse_integrator(r, root, c.integrator);
  parse_experiment(r, root, c.experiment);
  r.get(root, "", "seed", c.seed);
  r.get(root, "", "output_dir", c.output_dir);
  if (!r.errors.empty()) throw ConfigErrors(r.errors);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;

  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dimension" << YAML::Value << c.grid.dimension;
  out << YAML::Key << "bounds" << YAML::Value << YAML::BeginSeq;
  for (const auto& iv : c.grid.bounds) emit_list(out, {iv.lower, iv.upper});
  out << YAML::EndSeq;
  out << YAML::Key << "nodes_per_axis" << YAML::Value << c.grid.nodes_per_axis;
  out << YAML::EndMap;

  out << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap;
  emit_kernel_spec(out, c.kernel.spec);
  out << YAML::Key << "renormalize_rows" << YAML::Value << c.kernel.renormalize_rows;
  out << YAML::EndMap;

  const auto& m = c.model;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "decay" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << enum_name(kDecayFamilies, m.decay.family);
  out << YAML::Key << "h0" << YAML::Value << m.decay.h0;
  out << YAML::Key << "h1" << YAML::Value << m.decay.h1;
  out << YAML::EndMap;
  out << YAML::Key << "reaction" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << enum_name(kReactionFamilies, m.reaction.family);
  out << YAML::Key << "alpha" << YAML::Value << m.reaction.alpha;
  out << YAML::Key << "alpha_slope" << YAML::Value << m.reaction.alpha_slope;
  out << YAML::Key << "a" << YAML::Value << m.reaction.a;
  out << YAML::Key << "beta" << YAML::Value << m.reaction.beta;
  out << YAML::Key << "beta_slope" << YAML::Value << m.reaction.beta_slope;
  out << YAML::Key << "beta_cos" << YAML::Value << m.reaction.beta_cos;
  out << YAML::Key << "beta_freq" << YAML::Value << m.reaction.beta_freq;
  out << YAML::Key << "k_f" << YAML::Value << m.reaction.k_f;
  out << YAML::Key << "c_f" << YAML::Value << m.reaction.c_f;
  out << YAML::EndMap;
  out << YAML::Key << "gain" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << enum_name(kGainFamilies, m.gain.family);
  out << YAML::Key << "gamma" << YAML::Value << m.gain.gamma;
  out << YAML::Key << "a" << YAML::Value << m.gain.a;
  out << YAML::Key << "b" << YAML::Value << m.gain.b;
  out << YAML::Key << "k_g" << YAML::Value << m.gain.k_g;
  out << YAML::Key << "c_g" << YAML::Value << m.gain.c_g;
  out << YAML::EndMap;
  out << YAML::Key << "p" << YAML::Value;
  emit_list(out, m.p);
  out << YAML::Key << "delta" << YAML::Value << m.delta;
  out << YAML::Key << "mu" << YAML::Value << m.mu;
  out << YAML::Key << "gradient_diagnostics" << YAML::Value << m.gradient_diagnostics;
  out << YAML::EndMap;

  const auto& it = c.integrator;
  out << YAML::Key << "integrator" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "scheme" << YAML::Value << enum_name(kSchemes, it.scheme);
  out << YAML::Key << "dt" << YAML::Value << it.dt;
  out << YAML::Key << "t_end" << YAML::Value << it.t_end;
  out << YAML::Key << "record_every" << YAML::Value << static_cast<std::int64_t>(it.record_every);
  out << YAML::Key << "snapshot_every" << YAML::Value << static_cast<std::int64_t>(it.snapshot_every);
  out << YAML::Key << "record_gradients" << YAML::Value << it.record_gradients;
  out << YAML::EndMap;

  const auto& e = c.experiment;
  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << e.name;
  out << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << e.initial.kind;
  out << YAML::Key << "amplitude" << YAML::Value << e.initial.amplitude;
  out << YAML::Key << "frequency" << YAML::Value << e.initial.frequency;
  out << YAML::Key << "norm" << YAML::Value << e.initial.norm;
  out << YAML::EndMap;
  out << YAML::Key << "trajectories" << YAML::Value << e.trajectories;
  out << YAML::Key << "ensemble_size" << YAML::Value << e.ensemble_size;
  out << YAML::Key << "snapshots_per_member" << YAML::Value << e.snapshots_per_member;
  out << YAML::Key << "burn_in" << YAML::Value << e.burn_in;
  out << YAML::Key << "spacing" << YAML::Value << e.spacing;
  out << YAML::Key << "initial_radius" << YAML::Value << e.initial_radius;
  out << YAML::Key << "norm_factor" << YAML::Value << e.norm_factor;
  out << YAML::Key << "perturbation" << YAML::Value << e.perturbation;
  out << YAML::Key << "levels" << YAML::Value;
  emit_list(out, e.levels);
  if (e.target) {
    out << YAML::Key << "target" << YAML::Value << YAML::BeginMap;
    emit_kernel_spec(out, *e.target);
    out << YAML::EndMap;
  }
  out << YAML::Key << "bump" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "center" << YAML::Value;
  emit_list(out, e.bump_center);
  out << YAML::Key << "width" << YAML::Value << e.bump_width;
  out << YAML::EndMap;
  out << YAML::Key << "tolerance_factor" << YAML::Value << e.tolerance_factor;
  out << YAML::Key << "threshold_factor" << YAML::Value << e.threshold_factor;
  out << YAML::Key << "linearity_factor" << YAML::Value << e.linearity_factor;
  if (e.gradient_tolerance) out << YAML::Key << "gradient_tolerance" << YAML::Value << *e.gradient_tolerance;
  if (e.start_time) out << YAML::Key << "start_time" << YAML::Value << *e.start_time;
  out << YAML::EndMap;

  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& config) {
  RunConfig keyed = config;
  keyed.output_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(keyed)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nonlocal
