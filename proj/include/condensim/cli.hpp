#ifndef CONDENSIM_CLI_HPP
#define CONDENSIM_CLI_HPP

// Subcommands: chain-info, zrp-run, diff-run, compare, verify, psi4-check.
// Each builds its CSV tables from a RunConfig; dispatch() writes them with
// the run manifest and maps outcomes to exit codes
// (0 success, 1 check failure, 2 config error, 3 runtime error).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "condensim/config.hpp"
#include "condensim/csv.hpp"
#include "condensim/experiments.hpp"
#include "condensim/identities.hpp"

namespace condensim::cli {

enum ExitCode : int { Success = 0, CheckFailure = 1, ConfigError = 2, RuntimeError = 3 };

struct Check {
  std::string name;
  bool pass = true;
  std::string detail;
};

/// Tables keyed by file name plus assertion-class checks.
struct Outcome {
  std::map<std::string, CsvTable> tables;
  std::vector<Check> checks;
  std::vector<std::string> notes;

  bool failed() const {
    for (const auto& c : checks)
      if (!c.pass) return true;
    return false;
  }
  void add(const std::string& file, CsvTable t) { tables.insert_or_assign(file, std::move(t)); }
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"chain-info", "zrp-run", "diff-run", "compare", "verify", "psi4-check"};
  return names;
}

inline ChainSpec build_chain(const RunConfig& c) { return validate_chain(c.chain.rates, c.chain.m); }

inline JumpRates jump_rates(const RunConfig& c) { return JumpRates{c.model.g_family, c.model.b, c.model.g_c}; }

inline ZrpConfig zrp_config(const RunConfig& c, const ChainSpec& chain, long N) {
  ZrpConfig z;
  z.chain = chain;
  z.N = N;
  z.g = jump_rates(c);
  z.seed = c.experiment.seed;
  z.sample_times = c.experiment.sample_times;
  z.stop.horizon = c.diffusion.horizon;
  z.stop.delta = c.experiment.delta;
  z.config_hash = config_hash(c);
  return z;
}

inline DiffusionConfig diffusion_config(const RunConfig& c, const ChainSpec& chain) {
  DiffusionConfig d;
  d.chain = chain;
  d.b = c.model.b;
  d.dt_base = c.diffusion.dt_base;
  d.eps_abs = c.diffusion.eps_abs;
  d.drift_cap = c.diffusion.drift_cap;
  d.noise_scale = c.diffusion.noise_scale;
  d.seed = c.experiment.seed;
  d.horizon = c.diffusion.horizon;
  d.sample_times = c.experiment.sample_times;
  d.delta = c.experiment.delta;
  d.allow_subcritical = c.model.allow_subcritical;
  d.config_hash = config_hash(c);
  return d;
}

inline std::string site_label(int j) { return std::to_string(j + 1); }

// ---------------------------------------------------------------------------

inline Outcome chain_info(const RunConfig& cfg) {
  const ChainSpec chain = build_chain(cfg);
  const auto L = static_cast<int>(chain.size());
  CsvTable t({"quantity", "row", "col", "value"});
  for (int j = 0; j < L; ++j) t.add("m", site_label(j), "", chain.measure(j));
  t.add("m_sum", "", "", chain.measure().sum());
  for (int j = 0; j < L; ++j) t.add("holding_rate", site_label(j), "", chain.holding_rates()(j));
  const Matrix as = dirichlet_matrix(chain);
  for (int j = 0; j < L; ++j)
    for (int k = 0; k < L; ++k) t.add("a_s", site_label(j), site_label(k), as(j, k));

  Outcome out;
  const SiteSet B = cfg.requested_subset();
  if (!B.empty()) {
    const HarmonicBasis h = harmonic_extensions(chain, B);
    for (int j = 0; j < L; ++j)
      for (std::size_t c = 0; c < h.members.size(); ++c)
        t.add("u", site_label(j), site_label(h.members[c]), h.columns(j, static_cast<Eigen::Index>(c)));
    if (B.size() >= 2) {
      const TraceChainSpec tr = trace_rates(chain, B);
      const UpsilonMap ups = upsilon_map(tr.harmonic);
      const auto n = static_cast<Eigen::Index>(tr.size());
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k)
          t.add("trace_rate", site_label(tr.members[static_cast<std::size_t>(i)]), site_label(tr.members[static_cast<std::size_t>(k)]),
                tr.rates(i, k));
      for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < L; ++j) t.add("upsilon", site_label(tr.members[static_cast<std::size_t>(i)]), site_label(j), ups.matrix(i, j));
    }
    if (B.size() < chain.size()) {
      try {
        t.add("a0", B.mask(), "", psi4_radius(chain, B, cfg.model.b, cfg.experiment.p));
      } catch (const Error& e) {
        out.notes.push_back(std::string("a0 not reported: ") + e.what());
      }
    }
  }
  out.add("chain_info.csv", std::move(t));
  return out;
}

inline Outcome zrp_run(const RunConfig& cfg) {
  const ChainSpec chain = build_chain(cfg);
  const std::size_t L = chain.size();
  Outcome out;
  if (cfg.model.N.size() > 1) out.notes.push_back("zrp-run uses the first entry of model.N");
  const ZrpConfig z = zrp_config(cfg, chain, cfg.model.N.front());
  const std::vector<long> eta0 = nearest_configuration(cfg.start_point(), z.N);
  const auto paths = run_ensemble(cfg.experiment.paths, [&](std::size_t i) { return simulate_zrp_path(z, eta0, i); });

  std::vector<std::string> header{"path_id", "t"};
  for (auto& c : coordinate_columns(L)) header.push_back(c);
  CsvTable samples(header);
  CsvTable cond({"path_id", "t_cond", "winner"});
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& s = paths[p].sample;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<std::string> row{csv_cell(p), csv_cell(s.times[i])};
      for (Eigen::Index j = 0; j < s.points[i].size(); ++j) row.push_back(csv_cell(s.points[i](j)));
      samples.push(std::move(row));
    }
    const auto& rec = paths[p].condensation;
    cond.add(p, rec.time, rec.time ? site_label(rec.winner) : std::string());
  }
  out.add("zrp_paths.csv", std::move(samples));
  out.add("zrp_condensation.csv", std::move(cond));
  return out;
}

inline Outcome diff_run(const RunConfig& cfg) {
  const ChainSpec chain = build_chain(cfg);
  const std::size_t L = chain.size();
  const DiffusionConfig d = diffusion_config(cfg, chain);
  const TraceCache cache(chain);
  const Vector x0 = cfg.start_point();
  const auto paths = run_ensemble(cfg.experiment.paths, [&](std::size_t i) { return simulate_diffusion_path(d, x0, i, cache); });

  std::vector<std::string> header{"path_id", "t"};
  for (auto& c : coordinate_columns(L)) header.push_back(c);
  header.push_back("active_B");
  CsvTable samples(header);
  CsvTable events({"path_id", "n", "sigma_n", "B_n", "trapped_vertex"});
  Outcome out;
  std::uint64_t malformed = 0;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& s = paths[p].sample;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<std::string> row{csv_cell(p), csv_cell(s.times[i])};
      for (Eigen::Index j = 0; j < s.points[i].size(); ++j) row.push_back(csv_cell(s.points[i](j)));
      row.push_back(csv_cell(s.active[i]));
      samples.push(std::move(row));
    }
    const auto& a = paths[p].absorption;
    if (!absorption_structure_ok(a)) ++malformed;
    const std::string trapped = a.trapped_vertex ? site_label(*a.trapped_vertex) : std::string();
    for (std::size_t n = 0; n < a.events.size(); ++n) events.add(p, n, a.events[n].time, a.events[n].active, trapped);
  }
  out.checks.push_back({"absorption_structure", malformed == 0, std::to_string(malformed) + " malformed traces"});
  out.add("diff_paths.csv", std::move(samples));
  out.add("diff_absorption.csv", std::move(events));
  return out;
}

inline Outcome compare(const RunConfig& cfg) {
  const ChainSpec chain = build_chain(cfg);
  const std::size_t L = chain.size();
  DiffusionConfig d = diffusion_config(cfg, chain);
  d.sample_times.clear();
  const TraceCache cache(chain);
  const Vector x0 = cfg.start_point();
  const auto diff_out = run_diffusion_ensemble(d, x0, cfg.experiment.paths, cache);
  const DiffusionSummary ds = summarize_diffusion(diff_out, chain);

  Outcome out;
  CsvTable cmp({"N", "tv", "tv_stderr", "chi2", "chi2_dof", "chi2_p", "ks_condensation", "ks_condensation_p",
                "ks_first_absorption", "ks_first_absorption_p", "zrp_incomplete"});
  CsvTable win({"engine", "N", "site", "count"});
  for (std::size_t j = 0; j < L; ++j) win.add("diffusion", "", site_label(static_cast<int>(j)), ds.winners.counts[j]);
  for (long N : cfg.model.N) {
    ZrpConfig z = zrp_config(cfg, chain, N);
    z.sample_times.clear();
    const auto zo = run_zrp_ensemble(z, nearest_configuration(x0, N), cfg.experiment.paths);
    const ZrpSummary zs = summarize_zrp(zo, chain);
    for (std::size_t j = 0; j < L; ++j) win.add("zrp", N, site_label(static_cast<int>(j)), zs.winners.counts[j]);
    if (zs.winners.total == 0 || ds.winners.total == 0) {
      out.notes.push_back("N=" + std::to_string(N) + ": an engine produced no completed paths");
      continue;
    }
    const WinnerComparison wc = compare_winner(zs.winners, ds.winners);
    std::optional<KsResult> kc, kf;
    if (!zs.condensation_times.empty() && !ds.condensation_times.empty())
      kc = ks_two_sample(zs.condensation_times, ds.condensation_times);
    if (!zs.first_empty_times.empty() && !ds.first_absorption_times.empty())
      kf = ks_two_sample(zs.first_empty_times, ds.first_absorption_times);
    auto stat = [](const std::optional<KsResult>& k) { return k ? std::optional<double>(k->statistic) : std::nullopt; };
    auto pval = [](const std::optional<KsResult>& k) { return k ? std::optional<double>(k->p_value) : std::nullopt; };
    cmp.add(N, wc.tv, wc.tv_stderr, wc.chi_square.statistic, wc.chi_square.dof, wc.chi_square.p_value, stat(kc), pval(kc),
            stat(kf), pval(kf), zs.incomplete);
  }
  const double trapped = static_cast<double>(ds.winners.total) / static_cast<double>(cfg.experiment.paths);
  out.checks.push_back({"absorption_structure", ds.malformed == 0, std::to_string(ds.malformed) + " malformed traces"});
  if (cfg.model.b > 1.0)
    out.checks.push_back({"trapped_fraction", trapped >= 0.999, "trapped fraction " + format_double(trapped)});
  out.add("compare.csv", std::move(cmp));
  out.add("winners.csv", std::move(win));
  return out;
}

/// One psi4 row per subset. With no requested subset every B with a
/// nonempty complement and a feasible region is checked.
inline Outcome psi4_check(const RunConfig& cfg) {
  const ChainSpec chain = build_chain(cfg);
  const std::size_t L = chain.size();
  std::vector<std::string> header{"B", "b", "p", "epsilon", "a0", "grid", "points", "max_value"};
  for (auto& c : coordinate_columns(L, "argmax_x_")) header.push_back(c);
  header.push_back("pass");
  CsvTable t(header);
  Outcome out;
  std::vector<SiteSet> subsets;
  const SiteSet requested = cfg.requested_subset();
  if (!requested.empty()) {
    subsets.push_back(requested);
  } else {
    for (SiteSet B : subsets_of_size_at_least(L, 1))
      if (B.size() < L && static_cast<double>(B.size()) * cfg.experiment.epsilon <= 1.0) subsets.push_back(B);
  }
  for (SiteSet B : subsets) {
    const Psi4Report r = psi4_sign_check(chain, B, cfg.model.b, cfg.experiment.p, cfg.experiment.epsilon, cfg.experiment.grid);
    const bool pass = r.max_value <= 1e-12;
    std::vector<std::string> row{csv_cell(B), csv_cell(r.b), csv_cell(r.p), csv_cell(r.epsilon), csv_cell(r.a0),
                                 csv_cell(r.grid_resolution), csv_cell(r.points), csv_cell(r.max_value)};
    for (Eigen::Index j = 0; j < r.argmax.size(); ++j) row.push_back(csv_cell(r.argmax(j)));
    row.push_back(pass ? "1" : "0");
    t.push(std::move(row));
    out.checks.push_back({"psi4_sign B=" + std::to_string(B.mask()), pass, "max " + format_double(r.max_value)});
  }
  out.add("psi4.csv", std::move(t));
  return out;
}

inline Outcome verify(const RunConfig& cfg) {
  const ChainSpec chain = build_chain(cfg);
  const std::size_t L = chain.size();
  constexpr double tol = identity_tolerance;
  Outcome out;

  CsvTable ids({"check", "subset", "residual", "tolerance", "pass"});
  bool ids_ok = true;
  auto record = [&](const IdentityResidual& r, SiteSet B) {
    const bool pass = r.residual <= tol;
    ids_ok = ids_ok && pass;
    ids.add(r.name, B, r.residual, tol, pass ? "1" : "0");
  };
  for (const auto& r : chain_identity_residuals(chain)) record(r, SiteSet::full(L));
  for (SiteSet B : subsets_of_size_at_least(L, 2))
    for (const auto& r : subset_identity_residuals(chain, B)) record(r, B);
  out.checks.push_back({"identities", ids_ok, "all residuals <= 1e-10"});
  out.add("verify_identities.csv", std::move(ids));

  CsvTable checks({"check", "subset", "value", "threshold", "pass"});

  // sign of L f_A near each face
  Outcome psi = psi4_check(cfg);
  for (auto& c : psi.checks) out.checks.push_back(c);
  for (auto& [name, table] : psi.tables) out.add(name, std::move(table));

  // first-absorption bound from the configured start
  DiffusionConfig d = diffusion_config(cfg, chain);
  d.sample_times.clear();
  d.stop_at_first_absorption = true;
  const TraceCache cache(chain);
  const Vector x0 = cfg.start_point();
  const auto runs = run_diffusion_ensemble(d, x0, cfg.experiment.paths, cache);
  const SiteSet B0 = runs.front().absorption.events.front().active;
  if (B0.size() >= 2) {
    std::vector<double> sigma1;
    std::uint64_t censored = 0;
    for (const auto& r : runs) {
      if (auto s = r.absorption.first_absorption()) sigma1.push_back(*s);
      else ++censored;
    }
    if (!sigma1.empty()) {
      const R06Check rc = r06_bound_check(chain, B0, cfg.model.b, cfg.experiment.q, sigma1);
      checks.add("r06_bound", B0, rc.empirical_mean_sigma1 - rc.ci_halfwidth, rc.bound, rc.violated ? "0" : "1");
      out.checks.push_back({"r06_bound", !rc.violated,
                            "mean " + format_double(rc.empirical_mean_sigma1) + " bound " + format_double(rc.bound)});
    }
    if (censored) out.notes.push_back(std::to_string(censored) + " paths not absorbed before the horizon");
  } else {
    out.notes.push_back("start point lies on a vertex; first-absorption bound skipped");
  }

  // generator Taylor residual (enumerates Sigma_N, so only on small chains)
  if (L <= 4) {
    const std::vector<long> Ns{20, 40, 80, 160};
    const BumpFunction bump = standard_bumps(L, 2.0 * cfg.diffusion.eps_abs).front();
    const auto res = texp_residual(chain, cfg.model.b, jump_rates(cfg), bump, Ns);
    bool dec = true;
    for (std::size_t i = 0; i < res.size(); ++i) {
      const bool ok = i == 0 || res[i] <= 1.05 * res[i - 1];
      dec = dec && ok;
      checks.add("texp_residual N=" + std::to_string(Ns[i]), SiteSet::full(L), res[i],
                 i == 0 ? std::optional<double>() : std::optional<double>(1.05 * res[i - 1]), ok ? "1" : "0");
    }
    out.checks.push_back({"texp_decreasing", dec, ""});
  } else {
    out.notes.push_back("generator Taylor residual skipped for L > 4");
  }
  out.add("verify_checks.csv", std::move(checks));
  return out;
}

inline Outcome run_subcommand(const std::string& name, const RunConfig& cfg) {
  if (name == "chain-info") return chain_info(cfg);
  if (name == "zrp-run") return zrp_run(cfg);
  if (name == "diff-run") return diff_run(cfg);
  if (name == "compare") return compare(cfg);
  if (name == "verify") return verify(cfg);
  if (name == "psi4-check") return psi4_check(cfg);
  throw Error(ErrorKind::SchemaError, "unknown subcommand '" + name + "'");
}

// ---------------------------------------------------------------------------
// Manifest and dispatch

/// Error kinds caused by the configuration rather than by the run.
inline bool is_config_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::SchemaError:
    case ErrorKind::RangeError:
    case ErrorKind::Reducible:
    case ErrorKind::NotInvariant:
    case ErrorKind::NonPositiveMeasure:
    case ErrorKind::InvalidRates:
    case ErrorKind::BadExponents:
    case ErrorKind::SubsetTooSmall:
    case ErrorKind::NonSimplexStart:
    case ErrorKind::BadInitial:
    case ErrorKind::EmptyRegion:
      return true;
    default:
      return false;
  }
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ManifestInfo {
  std::string subcommand;
  std::string seed_source = "config";
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  double wall_seconds = 0.0;
  int exit_code = 0;
  std::string error;
};

inline nlohmann::json manifest_json(const ManifestInfo& info, const RunConfig* cfg, const Outcome* out) {
  nlohmann::json j;
  j["version"] = version;
  j["subcommand"] = info.subcommand;
  j["started_at"] = utc_timestamp(info.started);
  j["wall_time_seconds"] = info.wall_seconds;
  j["exit_code"] = info.exit_code;
  if (!info.error.empty()) j["error"] = info.error;
  if (cfg) {
    j["config_hash"] = hex64(config_hash(*cfg));
    j["seed"] = cfg->experiment.seed;
    j["seed_source"] = info.seed_source;
    j["config"] = config_to_json(*cfg);
    j["m_normalization"] = cfg->chain.m ? "supplied (kept as given)" : "computed, sum m_j = 1";
  }
  j["checks"] = nlohmann::json::array();
  if (out) {
    for (const auto& c : out->checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["files"] = nlohmann::json::array();
    for (const auto& [name, table] : out->tables) j["files"].push_back(name);
    j["notes"] = out->notes;
  }
  return j;
}

inline void write_manifest(const std::filesystem::path& dir, const ManifestInfo& info, const RunConfig* cfg,
                           const Outcome* out) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / "manifest.json", std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + (dir / "manifest.json").string());
  f << manifest_json(info, cfg, out).dump(2) << '\n';
}

/// Runs a subcommand, writes its tables and the manifest into the output
/// directory, and returns the exit code. Never throws.
using Runner = std::function<Outcome(const std::string&, const RunConfig&)>;

inline int dispatch(const std::string& subcommand, const RunConfig& cfg, std::ostream& log,
                    const std::string& seed_source = "config", const Runner& runner = run_subcommand) {
  ManifestInfo info;
  info.subcommand = subcommand;
  info.seed_source = seed_source;
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path dir(cfg.output.directory);
  Outcome out;
  bool have_outcome = false;
  try {
    out = runner(subcommand, cfg);
    have_outcome = true;
    std::filesystem::create_directories(dir);
    for (const auto& [name, table] : out.tables) table.write(dir / name);
    if (subcommand == "chain-info") std::cout << out.tables.at("chain_info.csv").str();
    for (const auto& n : out.notes) log << "note: " << n << '\n';
    for (const auto& c : out.checks)
      if (!c.pass) log << "FAILED " << c.name << ": " << c.detail << '\n';
    info.exit_code = out.failed() ? CheckFailure : Success;
  } catch (const Error& e) {
    info.error = e.what();
    info.exit_code = is_config_error(e.kind()) ? ConfigError : RuntimeError;
    log << "error: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    info.error = e.what();
    info.exit_code = RuntimeError;
    log << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    info.error = e.what();
    info.exit_code = RuntimeError;
    log << "error: " << e.what() << '\n';
  }
  info.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    write_manifest(dir, info, &cfg, have_outcome ? &out : nullptr);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    if (info.exit_code == Success) info.exit_code = RuntimeError;
  }
  return info.exit_code;
}

}  // namespace condensim::cli

#endif  // CONDENSIM_CLI_HPP
