#pragma once

// Text formats: a BIF subset for networks and JSON documents for networks,
// mixing proportions, oracle bundles, instances, results and experiment
// configurations. Components are written with node and category labels so
// documents stay readable and independent of internal ids.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ivnmix/dimm.hpp"
#include "ivnmix/em.hpp"
#include "ivnmix/exact_recovery.hpp"
#include "ivnmix/marginals.hpp"
#include "ivnmix/mixture.hpp"
#include "ivnmix/network.hpp"

namespace ivnmix {

/// Parses `network`, `variable` and `probability` blocks. `property` entries
/// are skipped; `//` and `%` start line comments. Rows whose sum is within
/// 1e-6 of one are renormalized. Throws SyntaxError, UndeclaredVariable,
/// TableShapeMismatch and any validation error.
CausalNetwork parse_bif(std::string_view text);
std::string network_to_bif(const CausalNetwork& network);

/// {name, nodes[{name, categories[], parents[]}], cpts[{node, rows[[p...]]}]}.
/// Nodes are written in stored order. Throws SchemaError.
std::string network_to_json(const CausalNetwork& network);
CausalNetwork network_from_json(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
/// BIF for ".bif" files, JSON otherwise.
CausalNetwork load_network(const std::filesystem::path& path);

/// {"components": [{"id": "phi", "pi": p}, {"id": {"node": n, "category": c}, "pi": p}, ...]}.
/// Every component of the network is listed, zeros included.
std::string spec_to_json(const MixtureSpec& spec, std::span<const NodeSpec> nodes);
MixtureSpec spec_from_json(std::string_view text, std::span<const NodeSpec> nodes);

std::string bundle_to_json(const OracleBundle& bundle);
OracleBundle bundle_from_json(std::string_view text);

std::string instance_to_json(const ProblemInstance& instance, std::span<const NodeSpec> nodes);
ProblemInstance instance_from_json(std::string_view text, std::span<const NodeSpec> nodes);

/// One header line of node names, then one line of category labels per sample.
std::string samples_to_csv(const CausalNetwork& network, std::span<const Assignment> samples);
std::vector<Assignment> samples_from_csv(std::string_view text, const CausalNetwork& network);

std::string recovery_to_json(const RecoveryResult& result, std::span<const NodeSpec> nodes);
std::string solver_report_to_json(const SolverReport& report, const OptProblem& prob,
                                  std::span<const NodeSpec> nodes);
std::string em_result_to_json(const EmResult& result, std::span<const NodeSpec> nodes);

/// Reads the "spec" member of a result document, or the "truth" member of an
/// instance, or a bare mixing-proportion document.
MixtureSpec any_spec_from_json(std::string_view text, std::span<const NodeSpec> nodes);

/// Node names and category labels in order of first appearance in a spec,
/// result or instance document. Parents are left empty.
std::vector<NodeSpec> nodes_from_spec_json(std::string_view text);

enum class Method { kExact, kDimm, kEm };

const char* to_string(Method method);
/// Throws RangeError for unknown names.
Method parse_method(std::string_view name);

struct ExperimentConfig {
  std::string network;
  std::vector<std::size_t> nivn{5};
  /// Sample counts; nullopt selects exact mixture marginals.
  std::vector<std::optional<std::size_t>> samples{std::nullopt};
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEpsilon;
  std::size_t restarts = kDefaultRestarts;
  std::size_t em_restarts = kDefaultEmRestarts;
  std::size_t em_max_iterations = kDefaultEmMaxIterations;
  double em_tolerance = kDefaultEmTolerance;
  Regularizer regularizer = Regularizer::kSquaredNorm;
  std::uint64_t seed = 0;
  /// Instances per N_ivn level; instance k uses seed + k.
  std::size_t instances = 1;
  std::vector<Method> methods{Method::kDimm};
  std::string output = "metrics.csv";
  /// Optional objective-trace CSV of every DIMM cell.
  std::string trace_output;
  /// When false the metrics CSV carries zero seconds so reruns compare equal.
  bool timing = true;
};

/// Scalars and lists are both accepted for nivn, samples and method(s);
/// samples may be "exact". Relative network paths resolve against
/// `base_dir`. Throws SchemaError or RangeError.
ExperimentConfig load_experiment_config(std::string_view text, const std::filesystem::path& base_dir = {});
void check_config(const ExperimentConfig& config);

}  // namespace ivnmix
