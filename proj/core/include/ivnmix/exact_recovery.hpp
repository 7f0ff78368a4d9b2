#pragma once

// Exact recovery of mixing proportions from exact marginals.
//
// Nodes are processed in topological order. For node j with retained
// categories b_1..b_K (positive base probability) the unknown proportions
// x_k = pi_{j,b_k} satisfy A x = b with
//
//   A[k][l] = delta_kl - a_k,  a_k = p(j, b_k),
//   b_k     = p_mix(j, b_k) - p(j, b_k)
//             - sum_{i<j, a} (p_{i,a}(j, b_k) - p(j, b_k)) pi_{i,a}.
//
// A has rank K-1, so the solutions form a line. Each coordinate hyperplane
// x_k = 0 cuts the line in one candidate point, and when every node keeps a
// category with zero proportion exactly one candidate is nonnegative.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ivnmix/marginals.hpp"
#include "ivnmix/mixture.hpp"

namespace ivnmix {

inline constexpr double kDefaultNonnegativityTolerance = 1e-9;

struct NodeSystem {
  NodeId node = 0;
  std::vector<CategoryIndex> categories;  // retained categories of the node
  std::vector<double> a;
  std::vector<double> b;

  std::size_t size() const { return a.size(); }
  double coefficient(std::size_t row, std::size_t col) const { return (row == col ? 1.0 : 0.0) - a[row]; }
  /// Euclidean norm of A x - b.
  double residual(std::span<const double> x) const;
};

/// Solutions of a node system: x = slopes * t + intercepts, parameterised by
/// t = x[pivot]. slopes[pivot] = 1 and intercepts[pivot] = 0.
struct SolutionLine {
  std::size_t pivot = 0;
  std::vector<double> slopes;
  std::vector<double> intercepts;

  std::size_t size() const { return slopes.size(); }
  std::vector<double> point(double t) const;
};

struct CandidateSet {
  std::vector<std::vector<double>> points;  // points[k][k] == 0
  std::vector<double> min_coordinate;

  std::size_t size() const { return points.size(); }
};

struct SelectedCandidate {
  std::size_t index = 0;
  std::vector<double> point;
};

/// `recovered` holds Do proportions indexed by flat (i, a); only entries of
/// nodes before `j` are read. Throws MissingMarginal.
NodeSystem build_node_system(NodeId j, const OracleBundle& bundle, std::span<const double> recovered);

/// Pivots on the largest a_k. Throws DegeneratePivot when it is below 1e-12.
SolutionLine reduce_to_line(const NodeSystem& system);

CandidateSet candidate_points(const SolutionLine& line);

/// The unique candidate with all coordinates >= -tol, negatives clamped to 0.
/// Throws NoNonnegativeCandidate or AmbiguousCandidates.
SelectedCandidate select_nonnegative(const CandidateSet& candidates,
                                     double tol = kDefaultNonnegativityTolerance);

enum class NodeStatus { kRecovered, kFailed, kSkipped };

struct NodeRecovery {
  NodeId node = 0;
  NodeStatus status = NodeStatus::kSkipped;
  /// Category whose hyperplane produced the selected point.
  std::optional<CategoryIndex> zero_category;
  double residual = 0.0;
  std::string message;
};

struct RecoveryResult {
  MixtureSpec spec;
  std::vector<NodeRecovery> nodes;

  bool ok() const;
  /// First failed node, if any.
  std::optional<NodeId> failed_node() const;
};

/// Runs the node-by-node sweep. A failing node stops the sweep; the report
/// keeps the proportions recovered so far and marks later nodes skipped.
RecoveryResult recover_all(const OracleBundle& bundle, double tol = kDefaultNonnegativityTolerance);

const char* to_string(NodeStatus status);

}  // namespace ivnmix
