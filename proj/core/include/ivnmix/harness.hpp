#pragma once

// Experiment orchestration: instances, oracle bundles, recovery methods and
// error metrics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ivnmix/interventions.hpp"
#include "ivnmix/mixture.hpp"
#include "ivnmix/model_io.hpp"

namespace ivnmix {

struct Metrics {
  std::size_t parameters = 0;  // N^c, the number of Do proportions compared
  double mse = 0.0;
  double mae = 0.0;
  double mabre = 0.0;  // largest absolute error
  std::optional<double> delta;
};

/// Errors over every Do proportion of the layout. Throws LayoutMismatch when
/// a spec names a component outside the layout.
Metrics compute_metrics(const CategoryLayout& layout, const MixtureSpec& truth, const MixtureSpec& est,
                        std::optional<double> obj_truth = std::nullopt, std::optional<double> obj_est = std::nullopt);

struct MetricsRow {
  std::size_t n_ivn = 0;
  std::optional<std::size_t> samples;  // nullopt for exact mixture marginals
  Method method = Method::kDimm;
  Metrics metrics;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

/// Objective trace of one DIMM cell.
struct TraceRecord {
  std::size_t n_ivn = 0;
  std::optional<std::size_t> samples;
  std::uint64_t seed = 0;
  std::vector<double> trace;
  double max_violation = 0.0;
};

/// Log-likelihood traces of every EM restart of one cell.
struct EmTraceRecord {
  std::size_t n_ivn = 0;
  std::optional<std::size_t> samples;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> runs;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;  // sorted by (N_ivn, m, method, seed)
  std::vector<TraceRecord> traces;
  std::vector<EmTraceRecord> em_traces;
};

/// Instance k of level N_ivn uses seed config.seed + k. Sampled mixture
/// marginals draw from derive_seed(instance seed, m); DIMM restarts and EM
/// restarts use their own derived streams. EM needs samples and is skipped
/// for exact cells. Errors are rethrown with the failing stage prefixed.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const CausalNetwork& network);

/// Header N_ivn,m,method,MSE,MAE,MABRE,delta,seconds,seed; numbers in %.5e.
/// Without `timing` the seconds column is written as zero so reruns compare
/// byte for byte.
std::string metrics_csv(const std::vector<MetricsRow>& rows, bool timing = true);
/// Header N_ivn,m,seed,step,objective.
std::string traces_csv(const std::vector<TraceRecord>& traces);

/// Seed streams used by run_experiment.
std::uint64_t sampling_seed(std::uint64_t instance_seed, std::size_t samples);
std::uint64_t dimm_seed(std::uint64_t instance_seed);
std::uint64_t em_seed(std::uint64_t instance_seed);

}  // namespace ivnmix
