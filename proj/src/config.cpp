#include "stablescale/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stablescale/errors.hpp"

namespace stablescale {
namespace {

using Json = nlohmann::json;

class Reader {
 public:
  Reader(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigParseError((path_.empty() ? std::string("config") : path_) + ": " + what);
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, value] : node_.items()) {
      if (!known.count(key)) Reader::at(key).fail("unknown key");
    }
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  Reader object(const std::string& key) const {
    if (!has(key)) fail("missing section '" + key + "'");
    return Reader(node_.at(key), join(key));
  }

  const Json& raw(const std::string& key) const { return node_.at(key); }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const std::string& key) const {
    if (!has(key)) fail("missing key '" + key + "'");
    const Json& v = node_.at(key);
    if (!v.is_number()) at(key).fail("expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::int64_t integer(const std::string& key) const {
    if (!has(key)) fail("missing key '" + key + "'");
    const Json& v = node_.at(key);
    if (!v.is_number_integer()) at(key).fail("expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::string string(const std::string& key) const {
    if (!has(key)) fail("missing key '" + key + "'");
    const Json& v = node_.at(key);
    if (!v.is_string()) at(key).fail("expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Json& v = node_.at(key);
    if (!v.is_boolean()) at(key).fail("expected true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string& key) const {
    const Json& v = node_.at(key);
    if (!v.is_array()) at(key).fail("expected an array of numbers");
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number()) at(key).fail("expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  // Error-reporting handle for a child key of any type.
  struct Leaf {
    std::string path;
    [[noreturn]] void fail(const std::string& what) const { throw ConfigParseError(path + ": " + what); }
  };
  Leaf at(const std::string& key) const { return Leaf{join(key)}; }

  const Json& node_;
  std::string path_;
};

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

Sequence read_sequence(const Reader& parent, const std::string& key, Index n) {
  if (!parent.has(key)) parent.fail("missing key '" + key + "'");
  const Json& node = parent.raw(key);
  if (node.is_array()) return Sequence::Explicit(to_vector(parent.numbers(key)));
  const Reader r(node, parent.join(key));
  if (r.has("values")) {
    r.allow({"values"});
    return Sequence::Explicit(to_vector(r.numbers("values")));
  }
  r.allow({"scale", "power"});
  return Sequence::Analytic(n, PowerLaw{r.number("scale", 1.0), r.number("power", 0.0)});
}

DriftFamily read_family(const Reader& r) {
  r.allow({"kind", "offset", "coeff_x", "coeff_y", "amplitude", "phase", "rate", "period",
           "lipschitz_x", "lipschitz_y", "growth"});
  DriftFamily f;
  try {
    f.kind = parse_drift_kind(r.string("kind"));
  } catch (const ConfigParseError&) {
    throw;
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  f.offset = r.number("offset", 0.0);
  f.coeff_x = r.number("coeff_x", 0.0);
  f.coeff_y = r.number("coeff_y", 0.0);
  f.amplitude = r.number("amplitude", 0.0);
  f.phase = r.number("phase", 0.0);
  f.rate = r.number("rate", 1.0);
  if (r.has("period")) {
    const Json& v = r.raw("period");
    try {
      if (v.is_string()) {
        f.period = Rational::parse(v.get<std::string>());
      } else if (v.is_number_integer()) {
        f.period = Rational(v.get<std::int64_t>());
      } else {
        r.fail("period must be a \"p/q\" string or an integer");
      }
    } catch (const ConfigParseError&) {
      throw;
    } catch (const std::exception& e) {
      r.fail(std::string("period: ") + e.what());
    }
  }
  f.with_tight_constants();
  f.lipschitz_x = r.number("lipschitz_x", f.lipschitz_x);
  f.lipschitz_y = r.number("lipschitz_y", f.lipschitz_y);
  f.growth = r.number("growth", f.growth);
  return f;
}

Json write_sequence(const Sequence& s) {
  if (s.law) return Json{{"scale", s.law->scale}, {"power", s.law->power}};
  return Json(std::vector<double>(s.values.data(), s.values.data() + s.values.size()));
}

Json write_family(const DriftFamily& f) {
  Json j;
  j["kind"] = to_string(f.kind);
  j["offset"] = f.offset;
  j["coeff_x"] = f.coeff_x;
  j["coeff_y"] = f.coeff_y;
  j["amplitude"] = f.amplitude;
  j["phase"] = f.phase;
  j["rate"] = f.rate;
  if (f.period) j["period"] = f.period->to_string();
  j["lipschitz_x"] = f.lipschitz_x;
  j["lipschitz_y"] = f.lipschitz_y;
  j["growth"] = f.growth;
  return j;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Json parse_json(std::string_view text, const std::string& source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string context;
    std::size_t start = text.rfind('\n', end == 0 ? 0 : end - 1);
    start = start == std::string_view::npos ? 0 : start + 1;
    const std::size_t stop = text.find('\n', start);
    context = std::string(text.substr(start, stop == std::string_view::npos ? text.size() - start : stop - start));
    throw ConfigParseError(source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                           ": syntax error\n  " + context);
  }
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  const Json doc = parse_json(text, source);
  if (!doc.is_object()) throw ConfigParseError(source + ": top level must be an object");
  const Reader root(doc, "");
  root.allow({"space", "operators", "noise", "drifts", "initial_data", "experiment"});

  RunConfig config;
  ModelSpec& m = config.model;

  const Reader space = root.object("space");
  space.allow({"modes", "collocation_nodes"});
  m.dimension = space.integer("modes");
  if (m.dimension < 1) space.fail("modes must be positive");
  m.collocation_nodes = space.integer("collocation_nodes", 0);

  const Reader ops = root.object("operators");
  ops.allow({"A", "B"});
  m.eigen_A = read_sequence(ops, "A", m.dimension);
  m.eigen_B = read_sequence(ops, "B", m.dimension);

  const Reader noise = root.object("noise");
  noise.allow({"alpha", "theta", "rho", "gamma"});
  m.alpha = noise.number("alpha");
  m.theta = noise.number("theta");
  m.rho = read_sequence(noise, "rho", m.dimension);
  m.gamma = read_sequence(noise, "gamma", m.dimension);

  const Reader drifts = root.object("drifts");
  drifts.allow({"F", "G"});
  m.drift_F = read_family(drifts.object("F"));
  m.drift_G = read_family(drifts.object("G"));

  m.initial_x = Eigen::VectorXd::Zero(0);
  m.initial_y = Eigen::VectorXd::Zero(0);
  if (root.has("initial_data")) {
    const Reader init = root.object("initial_data");
    init.allow({"x", "y"});
    if (init.has("x")) m.initial_x = to_vector(init.numbers("x"));
    if (init.has("y")) m.initial_y = to_vector(init.numbers("y"));
  }

  ExperimentConfig& e = config.experiment;
  if (root.has("experiment")) {
    const Reader ex = root.object("experiment");
    ex.allow({"seed", "T", "macro_steps", "pairs", "blocks", "p", "eps_grid", "slope_slack",
              "constant_factor", "trajectories", "eps", "fast_substeps", "estimator",
              "ensemble_size", "burn_in", "quadrature_nodes", "ergodic_horizon", "frozen_dt",
              "cache"});
    e.seed = static_cast<std::uint64_t>(ex.integer("seed", 0));
    e.T = ex.number("T", e.T);
    e.macro_steps = ex.integer("macro_steps", e.macro_steps);
    e.pairs = ex.integer("pairs", e.pairs);
    e.blocks = ex.integer("blocks", e.blocks);
    e.p = ex.number("p", e.p);
    if (ex.has("eps_grid")) e.eps_grid = ex.numbers("eps_grid");
    e.slope_slack = ex.number("slope_slack", e.slope_slack);
    e.constant_factor = ex.number("constant_factor", e.constant_factor);
    e.trajectories = ex.integer("trajectories", e.trajectories);
    e.eps = ex.number("eps", e.eps);
    m.fast_substeps = static_cast<int>(ex.integer("fast_substeps", 1));
    if (ex.has("estimator")) {
      try {
        e.drift.estimator = parse_drift_estimator(ex.string("estimator"));
      } catch (const ConfigParseError&) {
        throw;
      } catch (const std::exception& err) {
        ex.fail(err.what());
      }
    }
    e.drift.ensemble_size = ex.integer("ensemble_size", e.drift.ensemble_size);
    if (ex.has("burn_in")) e.drift.burn_in = ex.number("burn_in");
    e.drift.quadrature_nodes = ex.integer("quadrature_nodes", e.drift.quadrature_nodes);
    e.drift.ergodic_horizon = ex.number("ergodic_horizon", e.drift.ergodic_horizon);
    e.drift.frozen.dt = ex.number("frozen_dt", e.drift.frozen.dt);
    e.drift.cache = ex.boolean("cache", e.drift.cache);
  }
  e.drift.seed = e.seed;
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string config_to_json(const RunConfig& config) {
  const ModelSpec& m = config.model;
  const ExperimentConfig& e = config.experiment;
  Json j;
  j["space"] = {{"modes", m.dimension}, {"collocation_nodes", m.collocation_nodes}};
  j["operators"] = {{"A", write_sequence(m.eigen_A)}, {"B", write_sequence(m.eigen_B)}};
  j["noise"] = {{"alpha", m.alpha},
                {"theta", m.theta},
                {"rho", write_sequence(m.rho)},
                {"gamma", write_sequence(m.gamma)}};
  j["drifts"] = {{"F", write_family(m.drift_F)}, {"G", write_family(m.drift_G)}};
  j["initial_data"] = {{"x", to_std(m.initial_x)}, {"y", to_std(m.initial_y)}};
  Json ex;
  ex["seed"] = e.seed;
  ex["T"] = e.T;
  ex["macro_steps"] = e.macro_steps;
  ex["pairs"] = e.pairs;
  ex["blocks"] = e.blocks;
  ex["p"] = e.p;
  ex["eps_grid"] = e.eps_grid;
  ex["slope_slack"] = e.slope_slack;
  ex["constant_factor"] = e.constant_factor;
  ex["trajectories"] = e.trajectories;
  ex["eps"] = e.eps;
  ex["fast_substeps"] = m.fast_substeps;
  ex["estimator"] = to_string(e.drift.estimator);
  ex["ensemble_size"] = e.drift.ensemble_size;
  if (e.drift.burn_in) ex["burn_in"] = *e.drift.burn_in;
  ex["quadrature_nodes"] = e.drift.quadrature_nodes;
  ex["ergodic_horizon"] = e.drift.ergodic_horizon;
  ex["frozen_dt"] = e.drift.frozen.dt;
  ex["cache"] = e.drift.cache;
  j["experiment"] = ex;
  return j.dump(2) + "\n";
}

std::uint64_t config_hash(std::string_view text) {
  const std::string canonical = parse_json(text, "<config>").dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace stablescale
