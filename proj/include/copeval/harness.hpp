#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "copeval/environments.hpp"
#include "copeval/features.hpp"
#include "copeval/learners.hpp"
#include "copeval/mdp.hpp"

namespace copeval {

std::string code_version();

/// FNV-1a 64-bit hash, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Environment plus the features and ground truth needed to score learners.
struct BuiltEnvironment {
  std::string name;
  std::optional<TabularProblem> tabular;
  std::shared_ptr<AggregatedEnvironment> aggregated;
  FeatureMatrix phi;
  std::optional<FeatureMatrix> phi_rho;
  double discount = 0.99;

  // Tabular only.
  Vector d_behavior;
  Vector d_target;
  Vector rho_d;
  Vector theta_star;

  bool is_tabular() const { return tabular.has_value(); }
  Index n_states() const { return phi.n_states(); }
  std::unique_ptr<TransitionSource> stream(std::uint64_t seed) const;
};

/// Environment JSON: {"type": chain | random_mdp | tabular | mountain_car | acrobot | cart_pole, ...,
/// "value_features": kind, "ratio_features": kind}. Feature kinds: tabular, constant,
/// linear, binary, or {"kind": "matrix", "rows": [[...], ...]}.
BuiltEnvironment build_environment(const nlohmann::json& spec);

/// Feature matrix from a kind name or object for an environment with n states.
FeatureMatrix build_features(const nlohmann::json& kind, Index n_states);

enum class GroundTruth { oracle_fixed_point, on_policy_reference_run };

struct ExperimentConfig {
  nlohmann::json environment;
  std::vector<Algorithm> algorithms;
  LearnerConfig learner;
  GroundTruth ground_truth = GroundTruth::oracle_fixed_point;
  std::int64_t horizon = 0;
  /// 0 means horizon / 500.
  std::int64_t stride = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string output;
  // on_policy_reference_run settings.
  std::int64_t reference_steps = 1000000;
  double reference_alpha = 0.05;
  std::uint64_t reference_seed = 1000003;
  /// Steps per policy for the empirical ratio reference (0 disables rho_sse on aggregated tasks).
  std::int64_t ratio_reference_steps = 0;
  int workers = 1;

  std::int64_t effective_stride() const;
  /// Throws ConfigError.
  void validate(const BuiltEnvironment& env) const;
  nlohmann::json to_json() const;
  std::string hash() const;
};

/// Throws ConfigError on unknown keys or malformed values.
ExperimentConfig parse_experiment(const nlohmann::json& j);

struct MetricRow {
  std::int64_t t = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  std::string metric;
  double value = 0.0;

  bool operator==(const MetricRow&) const = default;
};

struct RunRecord {
  std::string config_hash;
  std::string code_version;
  std::vector<MetricRow> rows;
  std::vector<std::string> failures;

  bool partial() const { return !failures.empty(); }
  /// Value of the last row for (seed, algorithm, metric), if any.
  std::optional<double> final_value(std::uint64_t seed, const std::string& algorithm, const std::string& metric) const;
};

/// Metric scored on the value weights: eq9_error (tabular) or sse_vs_reference.
std::string primary_metric(const BuiltEnvironment& env);

RunRecord run_experiment(const ExperimentConfig& config);
/// As above with a prebuilt environment (avoids re-training aggregations).
RunRecord run_experiment(const ExperimentConfig& config, const BuiltEnvironment& env);

/// Throws ConfigError when rows break the schema (t strictly increasing per (seed, algorithm)).
void validate_record(const RunRecord& record);
void write_csv(const RunRecord& record, std::ostream& out);
void write_csv(const RunRecord& record, const std::string& path);
RunRecord read_csv(std::istream& in);
RunRecord read_csv_file(const std::string& path);

struct SweepCell {
  std::string key;
  std::map<std::string, double> params;
  RunRecord record;
  std::optional<std::string> error;
  std::optional<double> mean_final;
  /// Final value per seed for each metric of the first algorithm.
  std::map<std::string, std::vector<double>> finals;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::optional<std::size_t> best;
  nlohmann::json summary() const;
};

/// Grid keys: beta, gamma_log, lambda, step_value.scale, step_value.tau,
/// step_ratio.scale, step_ratio.tau. Cells run on up to `workers` threads and
/// are merged by cell index.
SweepResult sweep(const ExperimentConfig& base, const std::map<std::string, std::vector<double>>& grid, int workers);
std::map<std::string, std::vector<double>> parse_grid(const nlohmann::json& j);

/// Oracle quantities for a tabular environment; see oracle_report_text.
nlohmann::json oracle_report(const nlohmann::json& environment, const std::vector<double>& beta_grid = {0.0, 0.5, 0.9});
std::string oracle_report_text(const nlohmann::json& report);

/// Presets: chain-100, chain-30, random-32, random-256. Output is a tabular environment spec.
nlohmann::json export_mdp(const std::string& id);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace copeval
