#include "bartlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "bartlab/common.hpp"

namespace bartlab {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

long parse_long(const std::string& path, const std::string& value) {
  try {
    size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) fail(path, "trailing characters in '" + value + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(path, "expected an integer, got '" + value + "'");
  }
}

uint64_t parse_u64(const std::string& path, const std::string& value) {
  try {
    size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size() || value.empty() || value[0] == '-')
      fail(path, "expected a nonnegative integer, got '" + value + "'");
    return static_cast<uint64_t>(v);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(path, "expected a nonnegative integer, got '" + value + "'");
  }
}

double parse_double(const std::string& path, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) fail(path, "trailing characters in '" + value + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(path, "expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& path, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  fail(path, "expected true or false, got '" + value + "'");
}

TemperatureSchedule parse_temperature(const std::string& path,
                                      const std::string& token) {
  if (token.rfind("linear:", 0) == 0) {
    const auto parts = split(token.substr(7), ':');
    if (parts.size() != 2)
      fail(path, "linear schedule is linear:T_max:T_min, got '" + token + "'");
    return TemperatureSchedule::linear(parse_double(path, parts[0]),
                                       parse_double(path, parts[1]));
  }
  return TemperatureSchedule::constant(parse_double(path, token));
}

BinStrategy parse_binning(const std::string& path, const std::string& token) {
  BinStrategy strategy;
  if (token == "unique") {
    strategy.kind = BinStrategy::Kind::unique;
    return strategy;
  }
  if (token.rfind("quantiles:", 0) == 0) {
    strategy.kind = BinStrategy::Kind::quantiles;
    strategy.k = static_cast<int>(parse_long(path, token.substr(10)));
    if (strategy.k < 2) fail(path, "quantile binning needs k >= 2");
    return strategy;
  }
  fail(path, "expected unique or quantiles:K, got '" + token + "'");
}

SamplerVariant parse_sampler(const std::string& path,
                             const std::string& token) {
  if (token == "default") return SamplerVariant::default_sweep;
  if (token == "marginalized") return SamplerVariant::marginalized;
  if (token == "tempered") return SamplerVariant::tempered;
  if (token == "multistep") return SamplerVariant::multistep;
  fail(path,
       "expected default, marginalized, tempered, or multistep; got '" +
           token + "'");
}

Priors::SplitPrior parse_split_prior(const std::string& path,
                                     const std::string& token) {
  if (token == "uniform") return Priors::SplitPrior::uniform;
  if (token == "dirichlet") return Priors::SplitPrior::dirichlet;
  fail(path, "expected uniform or dirichlet, got '" + token + "'");
}

std::vector<AdditiveComponent> parse_components(const std::string& path,
                                                const std::string& value) {
  std::vector<AdditiveComponent> components;
  for (const std::string& entry : split(value, ';')) {
    if (entry.empty()) continue;
    const size_t colon = entry.find(':');
    if (colon == std::string::npos)
      fail(path, "component entry needs 'feature: v1, v2, ...', got '" +
                     entry + "'");
    AdditiveComponent component;
    component.feature =
        static_cast<int>(parse_long(path, trim(entry.substr(0, colon))));
    for (const std::string& v : split(entry.substr(colon + 1), ','))
      component.values.push_back(parse_double(path, v));
    components.push_back(std::move(component));
  }
  return components;
}

// Known key paths; anything else in the file is rejected with its path.
const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "dataset.kind",        "dataset.name",      "dataset.dgp",
      "dataset.d",           "dataset.levels",    "dataset.noise_sd",
      "dataset.components",  "dataset.beta_seed", "dataset.csv_path",
      "dataset.target",      "dataset.n_test",    "dataset.test_fraction",
      "sweep.n_train",       "sweep.temperature", "sweep.m",
      "sweep.burn_in",       "sweep.binning",     "sweep.prior",
      "sweep.moves",         "sweep.sampler",     "sweep.init",
      "run.iterations",      "run.n_chains",      "run.replicates",
      "run.seed",            "run.out_dir",       "run.paper_scale",
      "run.sigma",           "run.r",             "exact.max_internal",
      "exact.opt_slack",
  };
  return keys;
}

uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex16(uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

std::string render_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string dataset_canonical(const DatasetSpec& spec) {
  std::ostringstream os;
  if (spec.kind == DatasetSpec::Kind::csv) {
    os << "csv:" << spec.csv_path << ":" << spec.target_column
       << ":frac=" << render_double(spec.test_fraction);
    return os.str();
  }
  switch (spec.dgp.kind) {
    case DgpSpec::Kind::low_dim_smooth:
      os << "dgp:low_dim_smooth";
      break;
    case DgpSpec::Kind::piecewise_linear:
      os << "dgp:piecewise_linear:beta_seed=" << spec.dgp.beta_seed;
      break;
    case DgpSpec::Kind::additive_discrete: {
      os << "dgp:additive:d=" << spec.dgp.d << ":levels=" << spec.dgp.levels
         << ":noise=" << render_double(spec.dgp.noise_sd);
      for (const auto& component : spec.dgp.components) {
        os << ":f" << component.feature << "=";
        for (size_t i = 0; i < component.values.size(); ++i) {
          if (i) os << ",";
          os << render_double(component.values[i]);
        }
      }
      break;
    }
  }
  os << ":n_test=" << spec.n_test;
  return os.str();
}

std::string default_dataset_name(const DatasetSpec& spec) {
  if (spec.kind == DatasetSpec::Kind::csv) {
    const size_t slash = spec.csv_path.find_last_of('/');
    std::string stem = slash == std::string::npos
                           ? spec.csv_path
                           : spec.csv_path.substr(slash + 1);
    const size_t dot = stem.find_last_of('.');
    if (dot != std::string::npos) stem = stem.substr(0, dot);
    return stem.empty() ? "csv" : stem;
  }
  switch (spec.dgp.kind) {
    case DgpSpec::Kind::additive_discrete:
      return "additive";
    case DgpSpec::Kind::low_dim_smooth:
      return "low_dim_smooth";
    case DgpSpec::Kind::piecewise_linear:
      return "piecewise_linear";
  }
  return "dgp";
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty section name");
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                        key + "' appears before any [section] header");
    const std::string path = section + "." + key;
    if (entries.count(path))
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + path + "'");
    entries[path] = trim(t.substr(eq + 1));
  }
  return entries;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

ExperimentConfig experiment_config_from(
    const std::map<std::string, std::string>& entries) {
  for (const auto& [path, value] : entries) {
    (void)value;
    if (!known_keys().count(path))
      throw ConfigError("config: unknown key '" + path + "'");
  }
  const auto get = [&](const std::string& path) -> const std::string* {
    const auto it = entries.find(path);
    return it == entries.end() ? nullptr : &it->second;
  };

  ExperimentConfig config;
  DatasetSpec& ds = config.dataset;
  if (const auto* v = get("dataset.kind")) {
    if (*v == "dgp")
      ds.kind = DatasetSpec::Kind::dgp;
    else if (*v == "csv")
      ds.kind = DatasetSpec::Kind::csv;
    else
      fail("dataset.kind", "expected dgp or csv, got '" + *v + "'");
  }
  if (const auto* v = get("dataset.dgp")) {
    if (*v == "additive")
      ds.dgp.kind = DgpSpec::Kind::additive_discrete;
    else if (*v == "low_dim_smooth")
      ds.dgp.kind = DgpSpec::Kind::low_dim_smooth;
    else if (*v == "piecewise_linear")
      ds.dgp.kind = DgpSpec::Kind::piecewise_linear;
    else
      fail("dataset.dgp",
           "expected additive, low_dim_smooth, or piecewise_linear; got '" +
               *v + "'");
  }
  if (const auto* v = get("dataset.d"))
    ds.dgp.d = static_cast<int>(parse_long("dataset.d", *v));
  if (const auto* v = get("dataset.levels"))
    ds.dgp.levels = static_cast<int>(parse_long("dataset.levels", *v));
  if (const auto* v = get("dataset.noise_sd"))
    ds.dgp.noise_sd = parse_double("dataset.noise_sd", *v);
  if (const auto* v = get("dataset.components"))
    ds.dgp.components = parse_components("dataset.components", *v);
  if (const auto* v = get("dataset.beta_seed"))
    ds.dgp.beta_seed = parse_u64("dataset.beta_seed", *v);
  if (const auto* v = get("dataset.csv_path")) ds.csv_path = *v;
  if (const auto* v = get("dataset.target")) ds.target_column = *v;
  if (const auto* v = get("dataset.n_test"))
    ds.n_test = parse_long("dataset.n_test", *v);
  if (const auto* v = get("dataset.test_fraction"))
    ds.test_fraction = parse_double("dataset.test_fraction", *v);
  ds.name = get("dataset.name") ? *get("dataset.name")
                                : default_dataset_name(ds);

  const auto list = [&](const std::string& path) -> std::vector<std::string> {
    const auto* v = get(path);
    if (v == nullptr) return {};
    const auto tokens = split(*v, ',');
    for (const auto& t : tokens)
      if (t.empty()) fail(path, "empty list entry");
    return tokens;
  };

  if (const auto tokens = list("sweep.n_train"); !tokens.empty()) {
    config.n_train.clear();
    for (const auto& t : tokens)
      config.n_train.push_back(parse_long("sweep.n_train", t));
  }
  if (const auto tokens = list("sweep.temperature"); !tokens.empty()) {
    config.temperatures.clear();
    for (const auto& t : tokens)
      config.temperatures.push_back(parse_temperature("sweep.temperature", t));
  }
  if (const auto tokens = list("sweep.m"); !tokens.empty()) {
    config.m_values.clear();
    for (const auto& t : tokens)
      config.m_values.push_back(static_cast<int>(parse_long("sweep.m", t)));
  }
  if (const auto tokens = list("sweep.burn_in"); !tokens.empty()) {
    config.burn_ins.clear();
    for (const auto& t : tokens)
      config.burn_ins.push_back(parse_long("sweep.burn_in", t));
  }
  if (const auto tokens = list("sweep.binning"); !tokens.empty()) {
    config.binnings.clear();
    for (const auto& t : tokens)
      config.binnings.push_back(parse_binning("sweep.binning", t));
  }
  if (const auto tokens = list("sweep.prior"); !tokens.empty()) {
    config.split_priors.clear();
    for (const auto& t : tokens)
      config.split_priors.push_back(parse_split_prior("sweep.prior", t));
  }
  if (const auto tokens = list("sweep.moves"); !tokens.empty())
    config.move_sets = tokens;
  if (const auto tokens = list("sweep.sampler"); !tokens.empty()) {
    config.samplers.clear();
    for (const auto& t : tokens)
      config.samplers.push_back(parse_sampler("sweep.sampler", t));
  }
  if (const auto tokens = list("sweep.init"); !tokens.empty())
    config.inits = tokens;

  if (const auto* v = get("run.iterations"))
    config.iterations = parse_long("run.iterations", *v);
  if (const auto* v = get("run.n_chains"))
    config.n_chains = static_cast<int>(parse_long("run.n_chains", *v));
  if (const auto* v = get("run.replicates"))
    config.replicates = static_cast<int>(parse_long("run.replicates", *v));
  if (const auto* v = get("run.seed")) config.seed = parse_u64("run.seed", *v);
  if (const auto* v = get("run.out_dir")) config.out_dir = *v;
  if (const auto* v = get("run.paper_scale"))
    config.paper_scale = parse_bool("run.paper_scale", *v);
  if (const auto* v = get("run.sigma")) {
    if (*v == "inv_chi2") {
      config.sigma_mode = Priors::SigmaMode::inv_chi2;
    } else if (v->rfind("fixed:", 0) == 0) {
      config.sigma_mode = Priors::SigmaMode::fixed;
      config.sigma2 = parse_double("run.sigma", v->substr(6));
    } else {
      fail("run.sigma", "expected inv_chi2 or fixed:<value>, got '" + *v + "'");
    }
  }
  if (const auto* v = get("run.r"))
    config.r = static_cast<int>(parse_long("run.r", *v));
  if (const auto* v = get("exact.max_internal"))
    config.exact_max_internal =
        static_cast<int>(parse_long("exact.max_internal", *v));
  if (const auto* v = get("exact.opt_slack"))
    config.exact_opt_slack =
        static_cast<int>(parse_long("exact.opt_slack", *v));

  validate_experiment_config(config);
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from(parse_config_file(path));
}

void validate_experiment_config(const ExperimentConfig& config) {
  const DatasetSpec& ds = config.dataset;
  if (ds.kind == DatasetSpec::Kind::csv) {
    if (ds.csv_path.empty()) fail("dataset.csv_path", "required for csv data");
    if (ds.target_column.empty())
      fail("dataset.target", "required for csv data");
    if (!(ds.test_fraction > 0.0 && ds.test_fraction < 1.0))
      fail("dataset.test_fraction", "must lie in (0,1)");
  } else {
    validate_dgp(ds.dgp);
    if (ds.n_test < 1) fail("dataset.n_test", "must be >= 1");
    if (!config.paper_scale && ds.n_test > 2500)
      fail("dataset.n_test",
           "desk-scale cap is 2500; set run.paper_scale = true to lift it");
  }

  const auto require_nonempty = [](const std::string& path, size_t size) {
    if (size == 0) fail(path, "needs at least one value");
  };
  require_nonempty("sweep.n_train", config.n_train.size());
  require_nonempty("sweep.temperature", config.temperatures.size());
  require_nonempty("sweep.m", config.m_values.size());
  require_nonempty("sweep.burn_in", config.burn_ins.size());
  require_nonempty("sweep.binning", config.binnings.size());
  require_nonempty("sweep.prior", config.split_priors.size());
  require_nonempty("sweep.moves", config.move_sets.size());
  require_nonempty("sweep.sampler", config.samplers.size());
  require_nonempty("sweep.init", config.inits.size());

  for (const long n : config.n_train) {
    if (n < 20) fail("sweep.n_train", "values must be >= 20");
    if (!config.paper_scale && n > 5000)
      fail("sweep.n_train",
           "desk-scale cap is 5000; set run.paper_scale = true to lift it");
  }
  for (const auto& ts : config.temperatures) {
    if (ts.kind == TemperatureSchedule::Kind::constant) {
      if (!(ts.T >= 1.0)) fail("sweep.temperature", "constants must be >= 1");
    } else if (!(ts.T_min >= 1.0) || !(ts.T_max >= ts.T_min)) {
      fail("sweep.temperature", "linear schedule needs T_max >= T_min >= 1");
    }
  }
  for (const int m : config.m_values)
    if (m < 1 || m > 500) fail("sweep.m", "values must lie in [1, 500]");
  for (const long b : config.burn_ins) {
    if (b < 0) fail("sweep.burn_in", "values must be >= 0");
    if (!config.paper_scale && b > 2000)
      fail("sweep.burn_in",
           "desk-scale cap is 2000; set run.paper_scale = true to lift it");
  }
  for (const auto& moves : config.move_sets)
    if (moves != "all" && moves != "grow_prune")
      fail("sweep.moves", "expected all or grow_prune, got '" + moves + "'");
  for (const auto& init : config.inits)
    if (init != "trivial" && init != "greedy")
      fail("sweep.init", "expected trivial or greedy, got '" + init + "'");

  if (config.iterations < 2) fail("run.iterations", "must be >= 2 kept draws");
  if (!config.paper_scale && config.iterations > 2000)
    fail("run.iterations",
         "desk-scale cap is 2000; set run.paper_scale = true to lift it");
  if (config.n_chains < 2 || config.n_chains > 16)
    fail("run.n_chains", "must lie in [2, 16]");
  if (config.replicates < 1) fail("run.replicates", "must be >= 1");
  if (!config.paper_scale && config.replicates > 10)
    fail("run.replicates",
         "desk-scale cap is 10; set run.paper_scale = true to lift it");
  if (config.out_dir.empty()) fail("run.out_dir", "must be nonempty");
  if (!(config.sigma2 > 0.0)) fail("run.sigma", "fixed value must be > 0");
  if (config.r < 1) fail("run.r", "must be >= 1");

  bool any_multistep = false;
  bool any_marginalized_family = false;
  for (const auto sampler : config.samplers) {
    any_multistep |= sampler == SamplerVariant::multistep;
    any_marginalized_family |= sampler != SamplerVariant::default_sweep;
  }
  if (config.r > 1 && !any_multistep)
    fail("run.r", "r > 1 requires a multistep entry in sweep.sampler");
  if (any_marginalized_family &&
      config.sigma_mode != Priors::SigmaMode::fixed)
    fail("run.sigma",
         "marginalized, tempered, and multistep samplers require "
         "fixed:<value>");

  if (config.exact_max_internal < 0)
    fail("exact.max_internal", "must be >= 0");
  if (config.exact_opt_slack < 0) fail("exact.opt_slack", "must be >= 0");
}

std::vector<RunPoint> expand_points(const ExperimentConfig& config) {
  std::vector<RunPoint> points;
  for (size_t ni = 0; ni < config.n_train.size(); ++ni)
    for (const auto& ts : config.temperatures)
      for (const int m : config.m_values)
        for (const long burn : config.burn_ins)
          for (const auto& binning : config.binnings)
            for (const auto prior : config.split_priors)
              for (const auto& moves : config.move_sets)
                for (const auto sampler : config.samplers)
                  for (const auto& init : config.inits) {
                    RunPoint point;
                    point.n_train = config.n_train[ni];
                    point.n_train_index = ni;
                    point.temperature = ts;
                    point.m = m;
                    point.burn_in = burn;
                    point.binning = binning;
                    point.split_prior = prior;
                    point.move_set = moves;
                    point.sampler = sampler;
                    point.init = init;
                    point.hash = config_point_hash(config, point);
                    points.push_back(std::move(point));
                  }

  // Label: the swept non-n_train axes, rendered as "axis=value" pairs.
  std::vector<std::string> parts;
  for (auto& point : points) {
    parts.clear();
    if (config.temperatures.size() > 1)
      parts.push_back("T=" + render_temperature(point.temperature));
    if (config.m_values.size() > 1)
      parts.push_back("m=" + std::to_string(point.m));
    if (config.burn_ins.size() > 1)
      parts.push_back("burn=" + std::to_string(point.burn_in));
    if (config.binnings.size() > 1)
      parts.push_back("bin=" + render_binning(point.binning));
    if (config.split_priors.size() > 1)
      parts.push_back("prior=" + render_split_prior(point.split_prior));
    if (config.move_sets.size() > 1) parts.push_back("moves=" + point.move_set);
    if (config.samplers.size() > 1)
      parts.push_back("sampler=" + render_sampler(point.sampler));
    if (config.inits.size() > 1) parts.push_back("init=" + point.init);
    if (parts.empty()) {
      point.label = "default";
    } else {
      std::string label = parts[0];
      for (size_t i = 1; i < parts.size(); ++i) label += ", " + parts[i];
      point.label = label;
    }
  }
  return points;
}

MoveWeights move_weights_for(const std::string& move_set) {
  MoveWeights weights;
  if (move_set == "grow_prune") {
    weights.grow = 0.5;
    weights.prune = 0.5;
    weights.change = 0.0;
    weights.swap = 0.0;
  } else if (move_set != "all") {
    throw ConfigError("sweep.moves: unknown move set '" + move_set + "'");
  }
  return weights;
}

SamplerConfig sampler_config_for(const ExperimentConfig& config,
                                 const RunPoint& point) {
  SamplerConfig sc;
  sc.variant = point.sampler;
  sc.m = point.m;
  sc.weights = move_weights_for(point.move_set);
  sc.priors.sigma_mode = config.sigma_mode;
  sc.priors.sigma2 = config.sigma2;
  sc.priors.split_prior = point.split_prior;
  sc.temperature = point.temperature;
  sc.r = point.sampler == SamplerVariant::multistep ? config.r : 1;
  sc.iterations = config.iterations + point.burn_in;
  sc.burn_in = point.burn_in;
  return sc;
}

std::string render_temperature(const TemperatureSchedule& schedule) {
  if (schedule.kind == TemperatureSchedule::Kind::constant)
    return render_double(schedule.T);
  return "linear:" + render_double(schedule.T_max) + ":" +
         render_double(schedule.T_min);
}

std::string render_binning(const BinStrategy& strategy) {
  if (strategy.kind == BinStrategy::Kind::unique) return "unique";
  return "quantiles:" + std::to_string(strategy.k);
}

std::string render_sampler(SamplerVariant variant) {
  switch (variant) {
    case SamplerVariant::default_sweep:
      return "default";
    case SamplerVariant::marginalized:
      return "marginalized";
    case SamplerVariant::tempered:
      return "tempered";
    case SamplerVariant::multistep:
      return "multistep";
  }
  return "unknown";
}

std::string render_split_prior(Priors::SplitPrior prior) {
  return prior == Priors::SplitPrior::uniform ? "uniform" : "dirichlet";
}

std::string config_point_hash(const ExperimentConfig& config,
                              const RunPoint& point) {
  std::ostringstream os;
  os << "dataset=" << dataset_canonical(config.dataset)
     << "|name=" << config.dataset.name << "|iters=" << config.iterations
     << "|chains=" << config.n_chains << "|seed=" << config.seed
     << "|sigma="
     << (config.sigma_mode == Priors::SigmaMode::fixed
             ? "fixed:" + render_double(config.sigma2)
             : std::string("inv_chi2"))
     << "|r=" << config.r << "|n_train=" << point.n_train
     << "|T=" << render_temperature(point.temperature) << "|m=" << point.m
     << "|burn=" << point.burn_in << "|bin=" << render_binning(point.binning)
     << "|prior=" << render_split_prior(point.split_prior)
     << "|moves=" << point.move_set
     << "|sampler=" << render_sampler(point.sampler)
     << "|init=" << point.init;
  return hex16(fnv1a64(os.str()));
}

uint64_t test_seed(const ExperimentConfig& config) {
  return mix64(config.seed ^ 0x7E57DA7AULL);
}

uint64_t data_seed(const ExperimentConfig& config, size_t n_train_index,
                   int replicate) {
  uint64_t h = mix64(config.seed ^ 0xDA7A5EEDULL);
  h = mix64(h ^ (static_cast<uint64_t>(n_train_index) + 1));
  h = mix64(h ^ (static_cast<uint64_t>(replicate) + 1));
  return h;
}

uint64_t chain_base_seed(const ExperimentConfig& config, size_t n_train_index,
                         int replicate) {
  return mix64(data_seed(config, n_train_index, replicate) ^ 0xC4A15ULL);
}

uint64_t init_seed(const ExperimentConfig& config, size_t n_train_index,
                   int replicate) {
  return mix64(data_seed(config, n_train_index, replicate) ^ 0x1417ULL);
}

}  // namespace bartlab
