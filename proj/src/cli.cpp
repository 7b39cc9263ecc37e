#include "stablescale/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stablescale/averaging.hpp"
#include "stablescale/config.hpp"
#include "stablescale/errors.hpp"
#include "stablescale/experiments.hpp"
#include "stablescale/format.hpp"
#include "stablescale/parallel.hpp"
#include "stablescale/trajectory_io.hpp"

namespace stablescale {
namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out = ".";
  bool force = false;
};

struct Loaded {
  RunConfig config;
  std::string hash;
  ModelPtr model;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Loaded load(const CommonOptions& common) {
  const std::string text = read_file(common.config);
  Loaded l;
  l.config = parse_config(text, common.config);
  l.hash = hash_hex(config_hash(text));
  if (common.seed) {
    l.config.experiment.seed = *common.seed;
    l.config.experiment.drift.seed = *common.seed;
  }
  l.model = ValidatedModel::create(l.config.model);
  return l;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class OutputDir {
 public:
  OutputDir(const std::string& dir, bool force) : dir_(dir), force_(force) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  /// Checks every target up front so that a refused run writes nothing.
  void reserve(const std::vector<std::string>& names) const {
    if (force_) return;
    for (const std::string& name : names) {
      if (fs::exists(dir_ / name)) {
        throw IoError("refusing to overwrite " + (dir_ / name).string() + " (use --force)");
      }
    }
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
    written_.push_back(path.string());
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  bool force_;
  std::vector<std::string> written_;
};

void write_manifest(OutputDir& dir, const std::vector<std::string>& args, const CommonOptions& common,
                    const Loaded& loaded, const std::string& started) {
  nlohmann::ordered_json m;
  m["tool"] = "stablescale";
  m["version"] = kVersion;
  m["command"] = args;
  m["config"] = common.config;
  m["config_hash"] = loaded.hash;
  m["seed"] = loaded.config.experiment.seed;
  m["started"] = started;
  m["finished"] = utc_now();
  m["outputs"] = dir.written();
  dir.write("manifest.json", m.dump(2) + "\n");
}

void add_common(CLI::App* cmd, CommonOptions& common, bool with_output) {
  cmd->add_option("--config", common.config, "Run configuration (JSON)")->required();
  cmd->add_option("--seed", common.seed, "Override the configured seed");
  cmd->add_option("--threads", common.threads, "Worker threads (default: STABLESCALE_THREADS or 1)");
  if (with_output) {
    cmd->add_option("--out", common.out, "Output directory");
    cmd->add_flag("--force", common.force, "Overwrite existing outputs");
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw CLI::ValidationError("eps-grid", "bad number '" + item + "'");
    values.push_back(v);
  }
  return values;
}

int cmd_validate(const CommonOptions& common, std::ostream& out) {
  const RunConfig config = parse_config(read_file(common.config), common.config);
  const ValidationReport report = validate(config.model);
  out << "assumption checks for " << common.config << '\n';
  for (const char* a : {"A1", "A2", "A3", "A4", "A5"}) {
    bool failed = false;
    for (const Violation& v : report.violations) {
      if (v.code.rfind(a, 0) == 0) failed = true;
    }
    out << "  " << a << ": " << (failed ? "FAIL" : "PASS") << '\n';
  }
  for (const Violation& v : report.violations) {
    out << "  violation [" << v.code << "] " << v.message << '\n';
  }
  for (const TailReport& t : report.tails) {
    out << "  tail " << t.name << ": " << (t.convergent ? "convergent" : "divergent");
    if (t.symbolic) out << " (summand ~ k^" << format_double(t.decay_exponent) << ")";
    out << ", truncated sum " << format_double(t.truncated_sum) << ", tail bound "
        << format_double(t.tail_bound) << '\n';
  }
  for (const std::string& note : report.notes) out << "  note: " << note << '\n';
  out << (report.ok() ? "VALID" : "INVALID") << '\n';
  return report.ok() ? kExitOk : kExitFailure;
}

int cmd_simulate(const std::vector<std::string>& args, const CommonOptions& common,
                 std::optional<double> eps_opt, std::optional<Index> count_opt, std::ostream& out) {
  const std::string started = utc_now();
  const Loaded l = load(common);
  const ExperimentConfig& e = l.config.experiment;
  const double eps = eps_opt.value_or(e.eps);
  const Index count = count_opt.value_or(e.trajectories);
  if (!(eps > 0.0)) throw CLI::ValidationError("--eps", "must be positive");
  if (count < 1) throw CLI::ValidationError("--trajectories", "must be positive");

  std::vector<std::string> names;
  for (Index i = 0; i < count; ++i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "trajectory_%04lld.csv", static_cast<long long>(i));
    names.emplace_back(buf);
  }
  OutputDir dir(common.out, common.force);
  std::vector<std::string> all = names;
  all.emplace_back("manifest.json");
  dir.reserve(all);

  std::vector<std::uint32_t> ids(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::uint32_t>(i);
  EnsembleOptions options;
  options.threads = resolve_threads(common.threads);
  const EnsemblePath path =
      simulate_slowfast_ensemble(*l.model, eps, e.T, e.macro_steps, e.seed, ids, options);

  TrajectoryHeader header;
  header.model_hash = l.hash;
  header.manifest = "manifest.json";
  header.seed = e.seed;
  header.eps = eps;
  header.T = e.T;
  header.steps = e.macro_steps;
  header.modes = l.model->dimension();
  header.fast_substeps = l.config.model.fast_substeps;
  for (Index i = 0; i < count; ++i) {
    header.trajectory_id = ids[static_cast<std::size_t>(i)];
    std::ostringstream csv;
    write_trajectory_csv(csv, extract(path, i), header);
    dir.write(names[static_cast<std::size_t>(i)], csv.str());
  }
  write_manifest(dir, args, common, l, started);
  out << "wrote " << count << " trajectories to " << common.out << '\n';
  return kExitOk;
}

Field x_from(const std::string& source, const ValidatedModel& model) {
  if (source == "initial") return model.initial_x();
  std::ifstream in(source);
  if (!in) throw IoError("cannot read " + source);
  const StoredTrajectory stored = read_trajectory_csv(in);
  if (stored.trajectory.x.empty()) throw IoError(source + ": trajectory has no rows");
  const Field& x = stored.trajectory.x.back();
  if (x.dimension() != model.dimension()) {
    throw ConfigurationError(source + ": trajectory has " + std::to_string(x.dimension()) +
                             " modes, model has " + std::to_string(model.dimension()));
  }
  return x;
}

int cmd_average(const std::vector<std::string>& args, const CommonOptions& common,
                const std::string& kind_name, double t, const std::string& x_source,
                std::optional<Index> ensemble, std::ostream& out) {
  const std::string started = utc_now();
  const ReferenceKind kind = parse_reference_kind(kind_name);
  const Loaded l = load(common);
  const ExperimentConfig& e = l.config.experiment;
  const ValidatedModel& model = *l.model;
  const Field x = x_from(x_source, model);
  const Index E = ensemble.value_or(e.drift.ensemble_size);
  const double burn = e.drift.burn_in.value_or(default_burn_in(model, x));

  OutputDir dir(common.out, common.force);
  dir.reserve({"drift.csv", "manifest.json"});

  FrozenSampling sampling = e.drift.frozen;
  sampling.threads = resolve_threads(common.threads);
  DriftEstimate estimate;
  std::optional<Field> oracle;
  std::optional<AffineDriftOracle> affine;
  try {
    affine.emplace(model);
  } catch (const UnsupportedError&) {
  }
  switch (kind) {
    case ReferenceKind::EvolutionAveraged:
      estimate = estimate_evolution_drift(model, t, x, E, burn, e.seed, sampling);
      if (affine) oracle = affine->evolution(t, x);
      break;
    case ReferenceKind::PeriodicAveraged:
      estimate = periodic_average_drift(model, x, e.drift.quadrature_nodes, E, burn, e.seed, 0.0,
                                        sampling);
      if (affine) oracle = affine->periodic(x, e.drift.quadrature_nodes);
      break;
    case ReferenceKind::AsymptoticAveraged: {
      ErgodicSampling ergodic;
      ergodic.dt = e.drift.frozen.dt;
      estimate = asymptotic_average_drift(model, x, e.drift.ergodic_horizon, burn, e.seed, ergodic);
      if (affine) oracle = affine->asymptotic(x);
      break;
    }
  }

  std::ostringstream csv;
  csv << "# manifest=manifest.json\n# model_hash=" << l.hash << "\n# kind=" << to_string(kind)
      << "\n# samples=" << estimate.samples << "\n";
  csv << "t,mode,value,stderr,median_of_means,oracle\n";
  for (Index k = 0; k < model.dimension(); ++k) {
    csv << format_double(t) << ',' << (k + 1) << ',' << format_double(estimate.value[k]) << ','
        << format_double(estimate.std_error[k]) << ',' << format_double(estimate.median_of_means[k])
        << ',';
    if (oracle) csv << format_double((*oracle)[k]);
    csv << '\n';
  }
  dir.write("drift.csv", csv.str());
  write_manifest(dir, args, common, l, started);
  out << "wrote " << (fs::path(common.out) / "drift.csv").string() << " (" << to_string(kind)
      << ", " << estimate.samples << " samples, combined stderr "
      << format_double(estimate.combined_stderr()) << ")\n";
  return kExitOk;
}

int cmd_converge(const std::vector<std::string>& args, const CommonOptions& common, int theorem,
                 const std::string& eps_grid, std::optional<double> p_opt,
                 std::optional<Index> pairs_opt, std::ostream& out) {
  const std::string started = utc_now();
  const Loaded l = load(common);
  const ExperimentConfig& e = l.config.experiment;
  ConvergenceSettings s;
  s.theorem = theorem;
  s.eps_grid = eps_grid.empty() ? e.eps_grid : parse_list(eps_grid);
  s.p = p_opt.value_or(e.p);
  s.slope_slack = e.slope_slack;
  s.constant_factor = e.constant_factor;
  s.error.T = e.T;
  s.error.macro_steps = e.macro_steps;
  s.error.pairs = pairs_opt.value_or(e.pairs);
  s.error.blocks = e.blocks;
  s.error.seed = e.seed;
  s.error.threads = resolve_threads(common.threads);
  s.error.drift = e.drift;
  const double alpha = l.model->alpha().value();
  if (!(s.p > 1.0 && s.p < alpha)) {
    throw CLI::ValidationError("--p", "p = " + format_double(s.p) + " must lie in (1, alpha = " +
                                          format_double(alpha) + ")");
  }
  (void)reference_for_theorem(theorem);

  OutputDir dir(common.out, common.force);
  dir.reserve({"report.csv", "summary.json", "plot.csv", "manifest.json"});
  const ConvergenceReport report = run_convergence(l.model, s);

  std::ostringstream csv, plot;
  write_rate_csv(csv, report);
  write_plot_data(plot, report);
  nlohmann::ordered_json summary = nlohmann::ordered_json::parse(summary_json(report));
  summary["manifest"] = "manifest.json";
  summary["config_hash"] = l.hash;
  dir.write("report.csv", csv.str());
  dir.write("summary.json", summary.dump(2) + "\n");
  dir.write("plot.csv", plot.str());
  write_manifest(dir, args, common, l, started);

  out << "theorem " << theorem << " (" << to_string(report.reference) << " reference), p = "
      << format_double(s.p) << '\n';
  for (const ErrorEstimate& err : report.errors) {
    out << "  eps " << format_double(err.eps) << "  error " << format_double(err.value)
        << "  spread " << format_double(err.stderr_proxy) << '\n';
  }
  out << "  fitted slope " << format_double(report.rate.slope) << ", theoretical exponent "
      << format_double(report.rate.theory) << '\n';
  if (report.profile) {
    out << "  fitted constant " << format_double(report.profile->fitted_constant)
        << " (sub-grids " << format_double(report.profile->constant_even) << ", "
        << format_double(report.profile->constant_odd) << ")\n";
  }
  out << (report.pass ? "PASS" : "FAIL") << '\n';
  return report.pass ? kExitOk : kExitFailure;
}

int cmd_sweep(const std::vector<std::string>& args, const CommonOptions& common,
              const std::string& targets_text, std::ostream& out) {
  const std::string started = utc_now();
  const Loaded l = load(common);
  std::set<LemmaTarget> targets;
  std::stringstream ss(targets_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      targets.insert(parse_lemma_target(item));
    } catch (const ConfigurationError& e) {
      throw CLI::ValidationError("--targets", e.what());
    }
  }
  SweepSettings s;
  s.seed = l.config.experiment.seed;
  s.T = l.config.experiment.T;
  s.pairs = l.config.experiment.pairs;
  s.blocks = l.config.experiment.blocks;
  s.p = l.config.experiment.p;
  s.threads = resolve_threads(common.threads);

  OutputDir dir(common.out, common.force);
  dir.reserve({"lemma.csv", "manifest.json"});
  const LemmaReport report = lemma_sweeps(*l.model, targets, s);
  std::ostringstream csv;
  write_lemma_csv(csv, report);
  dir.write("lemma.csv", csv.str());
  write_manifest(dir, args, common, l, started);
  for (const LemmaCheck& c : report.checks) {
    out << "  " << c.name << ": measured " << format_double(c.measured) << ", threshold "
        << format_double(c.threshold) << " -> " << (c.pass ? "PASS" : "FAIL") << '\n';
  }
  out << (report.pass() ? "PASS" : "FAIL") << '\n';
  return report.pass() ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Slow-fast SPDEs with stable noise: simulation and averaging checks", "stablescale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions common;
  CLI::App* validate_cmd = app.add_subcommand("validate", "Check a configuration against the standing assumptions");
  add_common(validate_cmd, common, false);

  std::optional<double> eps;
  std::optional<Index> trajectories;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Simulate slow-fast trajectories");
  add_common(simulate_cmd, common, true);
  simulate_cmd->add_option("--eps", eps, "Time-scale ratio");
  simulate_cmd->add_option("--trajectories", trajectories, "Number of trajectories");

  std::string kind = "evolution";
  double t = 0.0;
  std::string x_source = "initial";
  std::optional<Index> ensemble;
  CLI::App* average_cmd = app.add_subcommand("average", "Estimate an averaged drift");
  add_common(average_cmd, common, true);
  average_cmd->add_option("--kind", kind, "evolution, periodic, or asymptotic")
      ->check(CLI::IsMember({"evolution", "periodic", "asymptotic"}));
  average_cmd->add_option("--t", t, "Drift time for the evolution kind");
  average_cmd->add_option("--x-from", x_source, "'initial' or a trajectory CSV (last row)");
  average_cmd->add_option("--ensemble", ensemble, "Frozen-run ensemble size");

  int theorem = 1;
  std::string eps_grid;
  std::optional<double> p;
  std::optional<Index> pairs;
  CLI::App* converge_cmd = app.add_subcommand("converge", "Strong-error sweep and rate fit");
  add_common(converge_cmd, common, true);
  converge_cmd->add_option("--theorem", theorem, "1 evolution, 2 periodic, 3 asymptotic")
      ->check(CLI::Range(1, 3));
  converge_cmd->add_option("--eps-grid", eps_grid, "Comma-separated decreasing eps values");
  converge_cmd->add_option("--p", p, "Moment order in (1, alpha)");
  converge_cmd->add_option("-M,--pairs", pairs, "Coupled pairs per eps");

  std::string targets = "moment,increment,auxiliary,contraction";
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Moment, increment, auxiliary and contraction sweeps");
  add_common(sweep_cmd, common, true);
  sweep_cmd->add_option("--targets", targets, "Comma-separated subset of the sweeps");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate_cmd) return cmd_validate(common, out);
    if (*simulate_cmd) return cmd_simulate(args, common, eps, trajectories, out);
    if (*average_cmd) return cmd_average(args, common, kind, t, x_source, ensemble, out);
    if (*converge_cmd) return cmd_converge(args, common, theorem, eps_grid, p, pairs, out);
    if (*sweep_cmd) return cmd_sweep(args, common, targets, out);
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationFailure& e) {
    err << "invalid model:\n";
    for (const Violation& v : e.report().violations) {
      err << "  [" << v.code << "] " << v.message << '\n';
    }
    return kExitFailure;
  } catch (const ConfigurationError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace stablescale
