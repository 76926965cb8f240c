#include "copeval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "copeval/errors.hpp"
#include "copeval/oracle.hpp"
#include "copeval/stats.hpp"

namespace copeval {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

bool is_aggregated_type(const std::string& type) {
  return type == "mountain_car" || type == "acrobot" || type == "cart_pole";
}

StochasticPolicy policy_from(const json& j) {
  try {
    return j.get<StochasticPolicy>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed policy: ") + e.what());
  }
}

}  // namespace

std::string code_version() { return COPEVAL_VERSION; }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------

FeatureMatrix build_features(const json& kind, Index n_states) {
  const std::string name = kind.is_string() ? kind.get<std::string>() : get_or<std::string>(kind, "kind", "");
  if (name == "tabular") return FeatureMatrix::identity(n_states);
  if (name == "constant") return FeatureMatrix::constant(n_states);
  if (name == "linear") return chain_linear_features(n_states);
  if (name == "binary") {
    int bits = 1;
    while ((Index{1} << bits) < n_states) ++bits;
    if (kind.is_object()) bits = get_or<int>(kind, "bits", bits);
    return binary_features(n_states, bits);
  }
  if (name == "matrix") {
    const auto rows = get_or<std::vector<std::vector<double>>>(kind, "rows", {});
    if (static_cast<Index>(rows.size()) != n_states || rows.empty()) {
      throw ConfigError("feature matrix needs one row per state");
    }
    RowMatrix phi(n_states, static_cast<Index>(rows.front().size()));
    for (Index s = 0; s < n_states; ++s) {
      const auto& r = rows[static_cast<std::size_t>(s)];
      if (static_cast<Index>(r.size()) != phi.cols()) throw ConfigError("ragged feature matrix");
      for (Index i = 0; i < phi.cols(); ++i) phi(s, i) = r[static_cast<std::size_t>(i)];
    }
    return FeatureMatrix(std::move(phi));
  }
  throw ConfigError("unknown feature kind '" + name + "'");
}

BuiltEnvironment build_environment(const json& spec) {
  if (!spec.is_object() || !spec.contains("type")) throw ConfigError("environment needs a 'type'");
  const std::string type = spec.at("type").get<std::string>();
  BuiltEnvironment env;
  env.name = type;
  json value_kind = "tabular";
  const bool same_policy = get_or<bool>(spec, "target_equals_behavior", false);

  if (type == "chain") {
    check_keys(spec, {"type", "n_states", "epsilon", "discount", "rewards", "value_features", "ratio_features",
                      "target_equals_behavior"},
               "chain environment");
    ChainSpec c;
    c.n_states = get_or<Index>(spec, "n_states", c.n_states);
    c.epsilon = get_or<double>(spec, "epsilon", c.epsilon);
    c.discount = get_or<double>(spec, "discount", c.discount);
    if (spec.contains("rewards")) c.rewards = vector_from_json(spec.at("rewards"));
    try {
      env.tabular = build_chain(c);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    value_kind = "linear";
  } else if (type == "random_mdp") {
    check_keys(spec, {"type", "n_states", "n_actions", "seed", "feature_bits", "policy_bias", "discount",
                      "value_features", "ratio_features", "target_equals_behavior"},
               "random_mdp environment");
    RandomMdpSpec r;
    r.n_states = get_or<Index>(spec, "n_states", r.n_states);
    r.n_actions = get_or<Index>(spec, "n_actions", r.n_actions);
    r.seed = get_or<std::uint64_t>(spec, "seed", r.seed);
    if (spec.contains("feature_bits")) r.feature_bits = spec.at("feature_bits").get<int>();
    r.policy_bias = get_or<double>(spec, "policy_bias", r.policy_bias);
    r.discount = get_or<double>(spec, "discount", r.discount);
    auto built = build_random_mdp(r);
    env.tabular = std::move(built.problem);
    int bits = static_cast<int>(built.features.n_features()) - 1;
    value_kind = json{{"kind", "binary"}, {"bits", bits}};
  } else if (type == "tabular") {
    check_keys(spec, {"type", "mdp", "behavior", "target", "value_features", "ratio_features",
                      "target_equals_behavior"},
               "tabular environment");
    TabularProblem p;
    try {
      p.mdp = spec.at("mdp").get<FiniteMdp>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed mdp: ") + e.what());
    }
    p.behavior = policy_from(spec.at("behavior"));
    p.target = same_policy ? p.behavior : policy_from(spec.at("target"));
    env.tabular = std::move(p);
  } else if (is_aggregated_type(type)) {
    check_keys(spec, {"type", "aggregation", "burn_in", "target_equals_behavior", "discount", "value_features",
                      "ratio_features"},
               type + " environment");
    AggregatedSpec a;
    a.simulator = parse_simulator(type);
    a.burn_in = get_or<std::int64_t>(spec, "burn_in", a.burn_in);
    a.target_equals_behavior = same_policy;
    if (spec.contains("aggregation")) {
      const json& g = spec.at("aggregation");
      check_keys(g, {"kind", "resolution", "n_clusters", "training_steps", "iterations", "seed"}, "aggregation");
      const std::string kind = get_or<std::string>(g, "kind", "kmeans");
      if (kind == "grid") {
        a.aggregation.kind = AggregationSpec::Kind::grid;
      } else if (kind == "kmeans") {
        a.aggregation.kind = AggregationSpec::Kind::kmeans;
      } else {
        throw ConfigError("aggregation kind must be 'grid' or 'kmeans'");
      }
      a.aggregation.resolution = get_or<int>(g, "resolution", a.aggregation.resolution);
      a.aggregation.n_clusters = get_or<Index>(g, "n_clusters", a.aggregation.n_clusters);
      a.aggregation.training_steps = get_or<std::int64_t>(g, "training_steps", a.aggregation.training_steps);
      a.aggregation.iterations = get_or<int>(g, "iterations", a.aggregation.iterations);
      a.aggregation.seed = get_or<std::uint64_t>(g, "seed", a.aggregation.seed);
    }
    env.aggregated = std::make_shared<AggregatedEnvironment>(a);
    env.discount = get_or<double>(spec, "discount", 0.99);
  } else {
    throw ConfigError("unknown environment type '" + type + "'");
  }

  if (env.tabular && same_policy) env.tabular->target = env.tabular->behavior;
  const Index n = env.tabular ? env.tabular->mdp.n_states() : env.aggregated->n_cells();
  if (spec.contains("value_features")) value_kind = spec.at("value_features");
  env.phi = build_features(value_kind, n);
  const json ratio_kind = spec.contains("ratio_features") ? spec.at("ratio_features") : value_kind;
  env.phi_rho = build_features(ratio_kind, n);

  if (env.tabular) {
    const TabularProblem& p = *env.tabular;
    p.mdp.validate();
    p.behavior.validate();
    p.target.validate();
    env.discount = p.mdp.discount;
    const InducedChain target_chain = induce(p.mdp, p.target);
    env.d_behavior = stationary_distribution(induce(p.mdp, p.behavior));
    env.d_target = stationary_distribution(target_chain);
    env.rho_d = covariate_shift(env.d_target, env.d_behavior);
    env.theta_star = lfa_fixed_point(env.phi, env.d_target, target_chain, env.discount);
  }
  return env;
}

std::unique_ptr<TransitionSource> BuiltEnvironment::stream(std::uint64_t seed) const {
  if (tabular) return std::make_unique<TabularStream>(tabular->mdp, tabular->behavior, tabular->target, seed);
  return aggregated->stream(seed);
}

std::string primary_metric(const BuiltEnvironment& env) {
  return env.is_tabular() ? "eq9_error" : "sse_vs_reference";
}

// ---------------------------------------------------------------------------

std::int64_t ExperimentConfig::effective_stride() const {
  if (stride > 0) return stride;
  return std::max<std::int64_t>(1, horizon / 500);
}

void ExperimentConfig::validate(const BuiltEnvironment& env) const {
  if (horizon < 0) throw ConfigError("horizon must be nonnegative");
  if (stride < 0) throw ConfigError("stride must be nonnegative");
  if (seeds.empty()) throw ConfigError("seed list is empty");
  if (algorithms.empty()) throw ConfigError("no algorithm configured");
  if (ground_truth == GroundTruth::oracle_fixed_point && !env.is_tabular()) {
    throw ConfigError("oracle_fixed_point ground truth needs a tabular environment");
  }
  if (ground_truth == GroundTruth::on_policy_reference_run && reference_steps <= 0) {
    throw ConfigError("reference run needs a positive step count");
  }
  if (workers < 1) throw ConfigError("workers must be at least 1");
  learner.validate();
}

json ExperimentConfig::to_json() const {
  std::vector<std::string> names;
  for (Algorithm a : algorithms) names.push_back(to_string(a));
  return {{"environment", environment},
          {"algorithm", names},
          {"learner", learner},
          {"ground_truth", ground_truth == GroundTruth::oracle_fixed_point ? "oracle_fixed_point"
                                                                            : "on_policy_reference_run"},
          {"horizon", horizon},
          {"stride", effective_stride()},
          {"seeds", seeds},
          {"reference", {{"steps", reference_steps}, {"alpha", reference_alpha}, {"seed", reference_seed}}},
          {"ratio_reference_steps", ratio_reference_steps}};
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(to_json().dump()); }

ExperimentConfig parse_experiment(const json& j) {
  check_keys(j, {"environment", "algorithm", "learner", "ground_truth", "horizon", "stride", "seeds", "output",
                 "reference", "ratio_reference_steps", "workers", "grid"},
             "experiment config");
  ExperimentConfig c;
  if (!j.contains("environment")) throw ConfigError("experiment config needs an 'environment'");
  c.environment = j.at("environment");
  if (!j.contains("algorithm")) throw ConfigError("experiment config needs an 'algorithm'");
  const json& alg = j.at("algorithm");
  if (alg.is_string()) {
    c.algorithms.push_back(parse_algorithm(alg.get<std::string>()));
  } else if (alg.is_array()) {
    for (const auto& a : alg) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
  } else {
    throw ConfigError("'algorithm' must be a name or a list of names");
  }
  if (j.contains("learner")) c.learner = j.at("learner").get<LearnerConfig>();
  const std::string type = c.environment.is_object() ? c.environment.value("type", "") : "";
  c.ground_truth = is_aggregated_type(type) ? GroundTruth::on_policy_reference_run : GroundTruth::oracle_fixed_point;
  if (j.contains("ground_truth")) {
    const auto g = j.at("ground_truth").get<std::string>();
    if (g == "oracle_fixed_point") {
      c.ground_truth = GroundTruth::oracle_fixed_point;
    } else if (g == "on_policy_reference_run") {
      c.ground_truth = GroundTruth::on_policy_reference_run;
    } else {
      throw ConfigError("unknown ground_truth '" + g + "'");
    }
  }
  c.horizon = get_or<std::int64_t>(j, "horizon", c.horizon);
  c.stride = get_or<std::int64_t>(j, "stride", c.stride);
  c.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", c.seeds);
  c.output = get_or<std::string>(j, "output", c.output);
  if (j.contains("reference")) {
    const json& r = j.at("reference");
    check_keys(r, {"steps", "alpha", "seed"}, "reference");
    c.reference_steps = get_or<std::int64_t>(r, "steps", c.reference_steps);
    c.reference_alpha = get_or<double>(r, "alpha", c.reference_alpha);
    c.reference_seed = get_or<std::uint64_t>(r, "seed", c.reference_seed);
  }
  c.ratio_reference_steps = get_or<std::int64_t>(j, "ratio_reference_steps", c.ratio_reference_steps);
  c.workers = get_or<int>(j, "workers", c.workers);
  return c;
}

// ---------------------------------------------------------------------------

std::optional<double> RunRecord::final_value(std::uint64_t seed, const std::string& algorithm,
                                             const std::string& metric) const {
  std::optional<double> out;
  for (const auto& r : rows) {
    if (r.seed == seed && r.algorithm == algorithm && r.metric == metric) out = r.value;
  }
  return out;
}

namespace {

struct Job {
  Algorithm algorithm;
  std::uint64_t seed;
  std::vector<MetricRow> rows;
  std::optional<std::string> failure;
};

void run_job(const ExperimentConfig& config, const BuiltEnvironment& env, const Vector* reference,
             const Vector* ratio_reference, Job& job) {
  const std::string name = to_string(job.algorithm);
  const std::string metric = primary_metric(env);
  const std::int64_t stride = config.effective_stride();
  std::int64_t t = 0;
  try {
    LearnerConfig lc = config.learner;
    lc.discount = env.discount;
    auto learner = make_learner(job.algorithm, lc, env.phi, env.phi_rho);
    auto stream = env.stream(job.seed);
    const Vector* truth = env.is_tabular() ? &env.rho_d : ratio_reference;
    for (t = 1; t <= config.horizon; ++t) {
      learner->observe(stream->next());
      if (t % stride != 0 && t != config.horizon) continue;
      const Vector& theta = learner->value_weights();
      const double value = env.is_tabular() ? error_metric(theta, env.theta_star, env.phi, env.d_target)
                                            : (theta - *reference).squaredNorm();
      job.rows.push_back({t, job.seed, name, metric, value});
      if (learner->has_ratio() && truth) {
        job.rows.push_back({t, job.seed, name, "rho_sse", (learner->ratio_estimates() - *truth).squaredNorm()});
      }
    }
  } catch (const std::exception& e) {
    job.failure = "seed=" + std::to_string(job.seed) + " algorithm=" + name + " t=" + std::to_string(t) + ": " +
                  e.what();
  }
}

}  // namespace

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

RunRecord run_experiment(const ExperimentConfig& config) {
  const BuiltEnvironment env = build_environment(config.environment);
  return run_experiment(config, env);
}

RunRecord run_experiment(const ExperimentConfig& config, const BuiltEnvironment& env) {
  config.validate(env);
  RunRecord record;
  record.config_hash = config.hash();
  record.code_version = code_version();
  if (config.horizon == 0) return record;

  Vector reference, ratio_reference;
  if (!env.is_tabular()) {
    reference = reference_value_weights(*env.aggregated, config.reference_steps, config.reference_seed,
                                        config.reference_alpha, env.discount);
    if (config.ratio_reference_steps > 0) {
      ratio_reference = empirical_ratio_reference(*env.aggregated, config.ratio_reference_steps,
                                                  config.reference_seed + 1);
    }
  }
  std::vector<Job> jobs;
  for (Algorithm a : config.algorithms) {
    for (std::uint64_t s : config.seeds) jobs.push_back({a, s, {}, {}});
  }
  parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
    run_job(config, env, &reference, ratio_reference.size() > 0 ? &ratio_reference : nullptr, jobs[i]);
  });
  for (auto& job : jobs) {
    record.rows.insert(record.rows.end(), job.rows.begin(), job.rows.end());
    if (job.failure) record.failures.push_back(*job.failure);
  }
  validate_record(record);
  return record;
}

// ---------------------------------------------------------------------------

void validate_record(const RunRecord& record) {
  std::map<std::pair<std::uint64_t, std::string>, std::int64_t> last_t;
  std::map<std::tuple<std::uint64_t, std::string, std::string>, std::int64_t> last_metric_t;
  for (const auto& r : record.rows) {
    if (r.t <= 0) throw ConfigError("record row with nonpositive t");
    if (r.algorithm.empty() || r.metric.empty()) throw ConfigError("record row with empty name");
    if (r.algorithm.find(',') != std::string::npos || r.metric.find(',') != std::string::npos) {
      throw ConfigError("record names may not contain commas");
    }
    const auto key = std::make_pair(r.seed, r.algorithm);
    auto it = last_t.find(key);
    if (it != last_t.end() && r.t < it->second) throw ConfigError("record rows not ordered in t");
    last_t[key] = r.t;
    const auto mkey = std::make_tuple(r.seed, r.algorithm, r.metric);
    auto mt = last_metric_t.find(mkey);
    if (mt != last_metric_t.end() && r.t <= mt->second) throw ConfigError("record t not strictly increasing");
    last_metric_t[mkey] = r.t;
  }
}

void write_csv(const RunRecord& record, std::ostream& out) {
  validate_record(record);
  out << "# config_hash=" << record.config_hash << '\n';
  out << "# code_version=" << record.code_version << '\n';
  out << "# status=" << (record.partial() ? "partial" : "complete") << '\n';
  for (const auto& f : record.failures) {
    std::string line = f;
    std::replace(line.begin(), line.end(), '\n', ' ');
    out << "# failure=" << line << '\n';
  }
  out << "t,seed,algorithm,metric_name,metric_value\n";
  for (const auto& r : record.rows) {
    out << r.t << ',' << r.seed << ',' << r.algorithm << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
}

void write_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_csv(record, out);
  out.close();
  // Read back to confirm the file parses under the schema.
  const RunRecord back = read_csv_file(path);
  if (back.rows.size() != record.rows.size()) throw ConfigError("CSV read-back mismatch for '" + path + "'");
}

RunRecord read_csv(std::istream& in) {
  RunRecord record;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header && line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
      if (key == "config_hash") record.config_hash = value;
      if (key == "code_version") record.code_version = value;
      if (key == "failure") record.failures.push_back(value);
      continue;
    }
    if (!header) {
      if (line != "t,seed,algorithm,metric_name,metric_value") throw ConfigError("CSV header mismatch");
      header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw ConfigError("CSV row needs 5 fields: '" + line + "'");
    MetricRow r;
    try {
      std::size_t used = 0;
      r.t = std::stoll(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("t");
      r.seed = std::stoull(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("seed");
      r.value = std::stod(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("value");
    } catch (const std::exception&) {
      throw ConfigError("malformed CSV row: '" + line + "'");
    }
    r.algorithm = fields[2];
    r.metric = fields[3];
    record.rows.push_back(std::move(r));
  }
  if (!header) throw ConfigError("CSV has no header");
  validate_record(record);
  return record;
}

RunRecord read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_csv(in);
}

// ---------------------------------------------------------------------------

std::map<std::string, std::vector<double>> parse_grid(const json& j) {
  static const std::set<std::string> known{"beta",        "gamma_log",         "lambda",         "step_value.scale",
                                           "step_value.tau", "step_ratio.scale", "step_ratio.tau"};
  if (!j.is_object()) throw ConfigError("grid must be an object");
  std::map<std::string, std::vector<double>> grid;
  for (const auto& [key, values] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown grid key '" + key + "'");
    auto v = values.is_array() ? values.get<std::vector<double>>() : std::vector<double>{values.get<double>()};
    if (v.empty()) throw ConfigError("grid key '" + key + "' has no values");
    grid[key] = std::move(v);
  }
  return grid;
}

namespace {

void apply_param(LearnerConfig& c, const std::string& key, double value) {
  if (key == "beta") {
    c.beta = value;
  } else if (key == "gamma_log") {
    c.gamma_log = value;
  } else if (key == "lambda") {
    c.lambda = value;
  } else if (key == "step_value.scale") {
    c.step_value = c.step_value.with_scale(value);
  } else if (key == "step_ratio.scale") {
    c.step_ratio = c.step_ratio.with_scale(value);
  } else if (key == "step_value.tau" || key == "step_ratio.tau") {
    StepSchedule& s = key == "step_value.tau" ? c.step_value : c.step_ratio;
    if (s.kind() == StepSchedule::Kind::power) {
      s = StepSchedule::power(s.scale(), value, s.exponent());
    } else if (s.kind() == StepSchedule::Kind::t_log_t) {
      s = StepSchedule::t_log_t(s.scale(), value);
    }
  } else {
    throw ConfigError("unknown grid key '" + key + "'");
  }
}

}  // namespace

SweepResult sweep(const ExperimentConfig& base, const std::map<std::string, std::vector<double>>& grid, int workers) {
  const BuiltEnvironment env = build_environment(base.environment);
  const std::string metric = primary_metric(env);
  SweepResult result;

  std::vector<std::map<std::string, double>> combos{{}};
  for (const auto& [key, values] : grid) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& partial : combos) {
      for (double v : values) {
        auto c = partial;
        c[key] = v;
        next.push_back(std::move(c));
      }
    }
    combos = std::move(next);
  }
  result.cells.resize(combos.size());
  parallel_for(combos.size(), workers, [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    cell.params = combos[i];
    for (const auto& [k, v] : cell.params) cell.key += (cell.key.empty() ? "" : ";") + k + "=" + short_double(v);
    if (cell.key.empty()) cell.key = "base";
    try {
      ExperimentConfig cfg = base;
      cfg.workers = 1;
      for (const auto& [k, v] : cell.params) apply_param(cfg.learner, k, v);
      cell.record = run_experiment(cfg, env);
      if (cell.record.partial()) cell.error = cell.record.failures.front();
      const std::string alg = to_string(cfg.algorithms.front());
      std::set<std::string> metrics;
      for (const auto& r : cell.record.rows) metrics.insert(r.metric);
      for (const auto& m : metrics) {
        for (std::uint64_t s : cfg.seeds) {
          if (auto v = cell.record.final_value(s, alg, m)) cell.finals[m].push_back(*v);
        }
      }
      const auto& primary = cell.finals[metric];
      if (!primary.empty()) cell.mean_final = mean(primary);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const SweepCell& c = result.cells[i];
    if (!c.mean_final || c.error) continue;
    if (!result.best || *c.mean_final < *result.cells[*result.best].mean_final) result.best = i;
  }
  return result;
}

json SweepResult::summary() const {
  json cells_json = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SweepCell& c = cells[i];
    json entry = {{"index", i}, {"key", c.key}, {"params", c.params}, {"status", c.error ? "failed" : "complete"}};
    entry["mean_final"] = c.mean_final ? json(*c.mean_final) : json(nullptr);
    entry["finals"] = c.finals;
    if (c.error) entry["error"] = *c.error;
    cells_json.push_back(std::move(entry));
  }
  json out = {{"cells", cells_json}};
  if (best) {
    out["best"] = {{"index", *best}, {"key", cells[*best].key}, {"params", cells[*best].params},
                   {"mean_final", *cells[*best].mean_final}};
  } else {
    out["best"] = nullptr;
  }
  return out;
}

// ---------------------------------------------------------------------------

json oracle_report(const json& environment, const std::vector<double>& beta_grid) {
  const BuiltEnvironment env = build_environment(environment);
  if (!env.is_tabular()) throw ConfigError("oracle report needs a tabular environment");
  const TabularProblem& p = *env.tabular;
  const InducedChain chain_pi = induce(p.mdp, p.target);
  const Vector v = value_function(chain_pi, env.discount);
  const Index n = env.n_states();

  json report;
  report["environment"] = env.name;
  report["n_states"] = n;
  report["discount"] = env.discount;
  report["d_behavior"] = vector_to_json(env.d_behavior);
  report["d_target"] = vector_to_json(env.d_target);
  report["rho_d"] = vector_to_json(env.rho_d);
  report["value_target"] = vector_to_json(v);
  report["value_landmarks"] = {{"first", v(0)}, {"last", v(n - 1)}};

  json fixed = json::array();
  auto add_fixed = [&](const std::string& label, const FeatureMatrix& phi) {
    fixed.push_back({{"features", label},
                     {"theta_behavior_weighting", vector_to_json(lfa_fixed_point(phi, env.d_behavior, chain_pi,
                                                                                 env.discount))},
                     {"theta_target_weighting", vector_to_json(lfa_fixed_point(phi, env.d_target, chain_pi,
                                                                               env.discount))}});
  };
  add_fixed("constant", FeatureMatrix::constant(n));
  add_fixed("value", env.phi);
  report["fixed_points"] = fixed;

  json contraction = json::array(), emphatic = json::array();
  for (double b : beta_grid) {
    contraction.push_back({{"beta", b}, {"modulus", contraction_modulus(chain_pi.p, b)}});
    const Vector f = emphatic_weights(env.d_behavior, chain_pi.p, b);
    emphatic.push_back({{"beta", b}, {"f", vector_to_json(f)}, {"f_over_d", vector_to_json(f.cwiseQuotient(env.d_behavior))}});
  }
  report["contraction"] = contraction;
  report["emphatic"] = emphatic;

  if (env.phi_rho) {
    try {
      const CopFixedPoint cop = cop_fa_fixed_point(*env.phi_rho, env.d_behavior, chain_pi.p, 0.0);
      report["cop_fixed_point"] = {{"beta", 0.0},
                                   {"theta_rho", vector_to_json(cop.theta_rho)},
                                   {"ratio", vector_to_json(cop.ratio)},
                                   {"on_boundary", cop.on_boundary}};
    } catch (const Error& e) {
      report["cop_fixed_point"] = {{"error", e.what()}};
    }
  }
  return report;
}

std::string oracle_report_text(const json& report) {
  std::ostringstream out;
  const auto d_mu = report.at("d_behavior").get<std::vector<double>>();
  const auto d_pi = report.at("d_target").get<std::vector<double>>();
  const auto rho = report.at("rho_d").get<std::vector<double>>();
  const std::size_t n = d_mu.size();
  char buf[256];
  out << "environment: " << report.at("environment").get<std::string>() << "  states: " << n
      << "  discount: " << report.at("discount").get<double>() << '\n';
  out << "state        d_behavior      d_target         rho_d\n";
  std::vector<std::size_t> shown;
  for (std::size_t s = 0; s < std::min<std::size_t>(n, 3); ++s) shown.push_back(s);
  for (std::size_t s = n > 3 ? std::max<std::size_t>(3, n - 3) : n; s < n; ++s) shown.push_back(s);
  for (std::size_t s : shown) {
    std::snprintf(buf, sizeof buf, "%5zu  %14.6e  %14.6e  %12.6g\n", s + 1, d_mu[s], d_pi[s], rho[s]);
    out << buf;
  }
  const auto& lm = report.at("value_landmarks");
  std::snprintf(buf, sizeof buf, "V_target(1) = %.4f   V_target(%zu) = %.4f\n", lm.at("first").get<double>(), n,
                lm.at("last").get<double>());
  out << buf;
  for (const auto& fp : report.at("fixed_points")) {
    out << "fixed point [" << fp.at("features").get<std::string>() << "]\n";
    for (const char* key : {"theta_behavior_weighting", "theta_target_weighting"}) {
      out << "  " << key << ":";
      for (double x : fp.at(key).get<std::vector<double>>()) {
        std::snprintf(buf, sizeof buf, " %.4f", x);
        out << buf;
      }
      out << '\n';
    }
  }
  out << "contraction modulus:";
  for (const auto& c : report.at("contraction")) {
    std::snprintf(buf, sizeof buf, "  beta=%g: %.6f", c.at("beta").get<double>(), c.at("modulus").get<double>());
    out << buf;
  }
  out << '\n';
  for (const auto& e : report.at("emphatic")) {
    const auto f = e.at("f_over_d").get<std::vector<double>>();
    std::snprintf(buf, sizeof buf, "emphatic f/d_behavior beta=%g: first %.6g last %.6g\n", e.at("beta").get<double>(),
                  f.front(), f.back());
    out << buf;
  }
  if (report.contains("cop_fixed_point")) {
    const auto& cop = report.at("cop_fixed_point");
    if (cop.contains("error")) {
      out << "ratio fixed point: " << cop.at("error").get<std::string>() << '\n';
    } else {
      out << "ratio fixed point theta_rho:";
      for (double x : cop.at("theta_rho").get<std::vector<double>>()) {
        std::snprintf(buf, sizeof buf, " %.6g", x);
        out << buf;
      }
      out << (cop.at("on_boundary").get<bool>() ? "  (boundary)" : "") << '\n';
    }
  }
  return out.str();
}

json export_mdp(const std::string& id) {
  TabularProblem p;
  if (id == "chain-100" || id == "chain-30") {
    ChainSpec c;
    c.n_states = id == "chain-100" ? 100 : 30;
    p = build_chain(c);
  } else if (id == "random-32" || id == "random-256") {
    RandomMdpSpec r;
    r.n_states = id == "random-32" ? 32 : 256;
    p = build_random_mdp(r).problem;
  } else {
    throw ConfigError("unknown environment preset '" + id + "'");
  }
  return {{"type", "tabular"}, {"mdp", p.mdp}, {"behavior", p.behavior}, {"target", p.target}};
}

}  // namespace copeval
