#ifndef CONDENSIM_CONFIG_HPP
#define CONDENSIM_CONFIG_HPP

// Run configuration: JSON parsing with schema validation, canonical
// emission, hashing and the run manifest.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "condensim/chain.hpp"
#include "condensim/error.hpp"
#include "condensim/zrp.hpp"

namespace condensim {

inline constexpr const char* version = "1.0.0";

struct ChainBlock {
  Matrix rates;
  std::optional<Vector> m;
};

struct ModelBlock {
  double b = 1.5;
  JumpRateFamily g_family = JumpRateFamily::Default;
  double g_c = 1.0;
  std::vector<long> N{100};
  bool allow_subcritical = false;
};

struct DiffusionBlock {
  double dt_base = 1e-3;
  double eps_abs = 1e-4;
  double noise_scale = 1.0;
  double horizon = 100.0;
  double drift_cap = 0.25;
};

struct ExperimentBlock {
  std::uint64_t paths = 1000;
  std::uint64_t seed = 0;
  std::vector<double> sample_times{0.0};
  double delta = 0.05;
  double q = 0.0;  // materialized as b + 0.5 when absent
  double p = 0.0;  // materialized as (1 + b) / 2 when absent
  double epsilon = 0.3;
  int grid = 50;
  std::vector<int> subset;         // 1-based site labels; empty = not requested
  std::optional<Vector> x0;        // default: barycenter
};

struct OutputBlock {
  std::string directory = "out";
  std::string format = "csv";
};

struct RunConfig {
  ChainBlock chain;
  ModelBlock model;
  DiffusionBlock diffusion;
  ExperimentBlock experiment;
  OutputBlock output;

  std::size_t sites() const { return static_cast<std::size_t>(chain.rates.rows()); }
  Vector start_point() const {
    if (experiment.x0) return *experiment.x0;
    return Vector::Constant(static_cast<Eigen::Index>(sites()), 1.0 / static_cast<double>(sites()));
  }
  SiteSet requested_subset() const {
    SiteSet s;
    for (int j : experiment.subset) s.insert(j - 1);
    return s;
  }
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::SchemaError, path + ": " + what);
}
[[noreturn]] inline void range_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::RangeError, path + ": " + what);
}

inline void reject_unknown(const json& obj, const std::string& path, std::set<std::string> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) schema_error(path + "/" + it.key(), "unknown key");
}

inline const json& require_object(const json& parent, const std::string& key, const std::string& path) {
  if (!parent.contains(key)) schema_error(path + "/" + key, "missing required block");
  const json& v = parent.at(key);
  if (!v.is_object()) schema_error(path + "/" + key, "expected an object");
  return v;
}

inline double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  return v.get<double>();
}

template <class T>
T get_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) schema_error(path, "expected an integer");
  return v.get<T>();
}

inline std::vector<double> get_number_array(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], path + "/" + std::to_string(i)));
  return out;
}

inline json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace detail

/// Parses and validates a JSON run configuration. Schema (all blocks except
/// "chain" and "experiment.seed" are optional):
///   chain:      { rates: [[...]], m: [...]? }
///   model:      { b, g_family: "default"|"quadratic", g_c, N: [..], allow_subcritical }
///   diffusion:  { dt_base, eps_abs, noise_scale, horizon, drift_cap }
///   experiment: { paths, seed, sample_times, delta, q, p, epsilon, grid, subset: [sites], x0: [...] }
///   output:     { directory, format }
inline RunConfig parse_config(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, std::string("document: ") + e.what());
  }
  if (!doc.is_object()) detail::schema_error("", "top level must be an object");
  detail::reject_unknown(doc, "", {"chain", "model", "diffusion", "experiment", "output"});
  RunConfig cfg;

  // chain
  const json& chain = detail::require_object(doc, "chain", "");
  detail::reject_unknown(chain, "/chain", {"rates", "m"});
  if (!chain.contains("rates") || !chain["rates"].is_array()) detail::schema_error("/chain/rates", "expected a square array of arrays");
  const json& rows = chain["rates"];
  const auto L = static_cast<Eigen::Index>(rows.size());
  if (L < 2) detail::range_error("/chain/rates", "need at least two sites");
  cfg.chain.rates.resize(L, L);
  for (Eigen::Index j = 0; j < L; ++j) {
    const std::string rp = "/chain/rates/" + std::to_string(j);
    const auto row = detail::get_number_array(rows[static_cast<std::size_t>(j)], rp);
    if (static_cast<Eigen::Index>(row.size()) != L) detail::schema_error(rp, "row length does not match number of rows");
    for (Eigen::Index k = 0; k < L; ++k) cfg.chain.rates(j, k) = row[static_cast<std::size_t>(k)];
  }
  if (chain.contains("m")) {
    const auto m = detail::get_number_array(chain["m"], "/chain/m");
    if (static_cast<Eigen::Index>(m.size()) != L) detail::schema_error("/chain/m", "length does not match rates");
    cfg.chain.m = Eigen::Map<const Vector>(m.data(), L);
  }

  // model
  if (doc.contains("model")) {
    const json& model = detail::require_object(doc, "model", "");
    detail::reject_unknown(model, "/model", {"b", "g_family", "g_c", "N", "allow_subcritical"});
    if (model.contains("b")) cfg.model.b = detail::get_number(model["b"], "/model/b");
    if (model.contains("g_family")) {
      if (!model["g_family"].is_string()) detail::schema_error("/model/g_family", "expected a string");
      const auto f = model["g_family"].get<std::string>();
      if (f == "default") cfg.model.g_family = JumpRateFamily::Default;
      else if (f == "quadratic") cfg.model.g_family = JumpRateFamily::Quadratic;
      else detail::schema_error("/model/g_family", "expected \"default\" or \"quadratic\"");
    }
    if (model.contains("g_c")) cfg.model.g_c = detail::get_number(model["g_c"], "/model/g_c");
    if (model.contains("N")) {
      if (!model["N"].is_array() || model["N"].empty()) detail::schema_error("/model/N", "expected a nonempty array");
      cfg.model.N.clear();
      for (std::size_t i = 0; i < model["N"].size(); ++i) {
        const long n = detail::get_integer<long>(model["N"][i], "/model/N/" + std::to_string(i));
        if (n < 1) detail::range_error("/model/N/" + std::to_string(i), "particle count must be positive");
        cfg.model.N.push_back(n);
      }
    }
    if (model.contains("allow_subcritical")) {
      if (!model["allow_subcritical"].is_boolean()) detail::schema_error("/model/allow_subcritical", "expected a boolean");
      cfg.model.allow_subcritical = model["allow_subcritical"].get<bool>();
    }
  }
  if (!(cfg.model.b > 1.0) && !cfg.model.allow_subcritical)
    detail::range_error("/model/b", "b <= 1 is outside the absorbing regime (no condensation, the limit is not "
                                    "expected to be absorbed); set model.allow_subcritical to run it anyway");

  // diffusion
  if (doc.contains("diffusion")) {
    const json& d = detail::require_object(doc, "diffusion", "");
    detail::reject_unknown(d, "/diffusion", {"dt_base", "eps_abs", "noise_scale", "horizon", "drift_cap"});
    if (d.contains("dt_base")) cfg.diffusion.dt_base = detail::get_number(d["dt_base"], "/diffusion/dt_base");
    if (d.contains("eps_abs")) cfg.diffusion.eps_abs = detail::get_number(d["eps_abs"], "/diffusion/eps_abs");
    if (d.contains("noise_scale")) cfg.diffusion.noise_scale = detail::get_number(d["noise_scale"], "/diffusion/noise_scale");
    if (d.contains("horizon")) cfg.diffusion.horizon = detail::get_number(d["horizon"], "/diffusion/horizon");
    if (d.contains("drift_cap")) cfg.diffusion.drift_cap = detail::get_number(d["drift_cap"], "/diffusion/drift_cap");
  }
  if (!(cfg.diffusion.dt_base > 0.0)) detail::range_error("/diffusion/dt_base", "must be positive");
  if (!(cfg.diffusion.eps_abs > 0.0 && cfg.diffusion.eps_abs < 0.1)) detail::range_error("/diffusion/eps_abs", "must lie in (0, 0.1)");
  if (!(cfg.diffusion.noise_scale >= 0.0 && cfg.diffusion.noise_scale <= 1.0)) detail::range_error("/diffusion/noise_scale", "must lie in [0, 1]");
  if (!(cfg.diffusion.horizon > 0.0)) detail::range_error("/diffusion/horizon", "must be positive");
  if (!(cfg.diffusion.drift_cap > 0.0)) detail::range_error("/diffusion/drift_cap", "must be positive");

  // experiment
  const json& e = detail::require_object(doc, "experiment", "");
  detail::reject_unknown(e, "/experiment", {"paths", "seed", "sample_times", "delta", "q", "p", "epsilon", "grid", "subset", "x0"});
  if (!e.contains("seed")) detail::schema_error("/experiment/seed", "missing required key (runs are never seeded from the clock)");
  cfg.experiment.seed = detail::get_integer<std::uint64_t>(e["seed"], "/experiment/seed");
  if (e.contains("paths")) cfg.experiment.paths = detail::get_integer<std::uint64_t>(e["paths"], "/experiment/paths");
  if (cfg.experiment.paths < 1) detail::range_error("/experiment/paths", "must be at least 1");
  if (e.contains("sample_times")) cfg.experiment.sample_times = detail::get_number_array(e["sample_times"], "/experiment/sample_times");
  for (std::size_t i = 0; i < cfg.experiment.sample_times.size(); ++i) {
    if (cfg.experiment.sample_times[i] < 0.0) detail::range_error("/experiment/sample_times", "times must be nonnegative");
    if (i > 0 && !(cfg.experiment.sample_times[i] > cfg.experiment.sample_times[i - 1]))
      detail::range_error("/experiment/sample_times", "times must be strictly increasing");
  }
  if (e.contains("delta")) cfg.experiment.delta = detail::get_number(e["delta"], "/experiment/delta");
  if (!(cfg.experiment.delta > 0.0 && cfg.experiment.delta < 1.0)) detail::range_error("/experiment/delta", "must lie in (0, 1)");
  cfg.experiment.q = e.contains("q") ? detail::get_number(e["q"], "/experiment/q") : cfg.model.b + 0.5;
  cfg.experiment.p = e.contains("p") ? detail::get_number(e["p"], "/experiment/p") : 0.5 * (1.0 + cfg.model.b);
  if (e.contains("epsilon")) cfg.experiment.epsilon = detail::get_number(e["epsilon"], "/experiment/epsilon");
  if (!(cfg.experiment.epsilon > 0.0 && cfg.experiment.epsilon < 1.0)) detail::range_error("/experiment/epsilon", "must lie in (0, 1)");
  if (e.contains("grid")) cfg.experiment.grid = detail::get_integer<int>(e["grid"], "/experiment/grid");
  if (cfg.experiment.grid < 2) detail::range_error("/experiment/grid", "need at least 2 points per axis");
  if (e.contains("subset")) {
    if (!e["subset"].is_array()) detail::schema_error("/experiment/subset", "expected an array of site labels");
    for (std::size_t i = 0; i < e["subset"].size(); ++i) {
      const int s = detail::get_integer<int>(e["subset"][i], "/experiment/subset/" + std::to_string(i));
      if (s < 1 || s > L) detail::range_error("/experiment/subset/" + std::to_string(i), "site label out of range 1..L");
      cfg.experiment.subset.push_back(s);
    }
  }
  if (e.contains("x0")) {
    const auto x = detail::get_number_array(e["x0"], "/experiment/x0");
    if (static_cast<Eigen::Index>(x.size()) != L) detail::schema_error("/experiment/x0", "length does not match rates");
    Vector v = Eigen::Map<const Vector>(x.data(), L);
    if ((v.array() < 0.0).any() || std::abs(v.sum() - 1.0) > 1e-9) detail::range_error("/experiment/x0", "must be a point of the simplex");
    cfg.experiment.x0 = v;
  }

  // output
  if (doc.contains("output")) {
    const json& o = detail::require_object(doc, "output", "");
    detail::reject_unknown(o, "/output", {"directory", "format"});
    if (o.contains("directory")) {
      if (!o["directory"].is_string()) detail::schema_error("/output/directory", "expected a string");
      cfg.output.directory = o["directory"].get<std::string>();
    }
    if (o.contains("format")) {
      if (!o["format"].is_string() || o["format"].get<std::string>() != "csv")
        detail::schema_error("/output/format", "only \"csv\" is supported");
    }
  }
  return cfg;
}

/// Canonical JSON with every default materialized.
inline nlohmann::json config_to_json(const RunConfig& c) {
  using detail::json;
  json j;
  json rates = json::array();
  for (Eigen::Index r = 0; r < c.chain.rates.rows(); ++r) rates.push_back(detail::vector_to_json(c.chain.rates.row(r).transpose()));
  j["chain"]["rates"] = rates;
  if (c.chain.m) j["chain"]["m"] = detail::vector_to_json(*c.chain.m);
  j["model"] = {{"b", c.model.b}, {"g_family", to_string(c.model.g_family)}, {"g_c", c.model.g_c},
                {"N", c.model.N}, {"allow_subcritical", c.model.allow_subcritical}};
  j["diffusion"] = {{"dt_base", c.diffusion.dt_base}, {"eps_abs", c.diffusion.eps_abs}, {"noise_scale", c.diffusion.noise_scale},
                    {"horizon", c.diffusion.horizon}, {"drift_cap", c.diffusion.drift_cap}};
  j["experiment"] = {{"paths", c.experiment.paths}, {"seed", c.experiment.seed}, {"sample_times", c.experiment.sample_times},
                     {"delta", c.experiment.delta}, {"q", c.experiment.q}, {"p", c.experiment.p},
                     {"epsilon", c.experiment.epsilon}, {"grid", c.experiment.grid}, {"subset", c.experiment.subset}};
  if (c.experiment.x0) j["experiment"]["x0"] = detail::vector_to_json(*c.experiment.x0);
  j["output"] = {{"directory", c.output.directory}, {"format", c.output.format}};
  return j;
}

inline std::string emit_config(const RunConfig& c) { return config_to_json(c).dump(2); }

inline bool operator==(const RunConfig& a, const RunConfig& b) { return config_to_json(a) == config_to_json(b); }

/// FNV-1a of the compact canonical JSON (keys sorted by the JSON library).
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = config_to_json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace condensim

#endif  // CONDENSIM_CONFIG_HPP
