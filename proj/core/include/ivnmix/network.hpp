#pragma once

// Causal Bayesian networks over categorical variables.
//
// Categories are dense indices 0..K-1; labels are kept for I/O only. A
// CausalNetwork always stores its nodes in topological order, so a NodeId is
// also the node's position in that order.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ivnmix/random.hpp"

namespace ivnmix {

using NodeId = std::size_t;
using CategoryIndex = std::size_t;

/// Tolerance on CPT row sums.
inline constexpr double kProbabilityTolerance = 1e-9;

struct NodeSpec {
  std::string name;
  std::vector<std::string> categories;
  std::vector<NodeId> parents;

  std::size_t cardinality() const { return categories.size(); }
  bool operator==(const NodeSpec&) const = default;
};

/// Conditional probability table of one node. Rows are laid out row-major
/// over parent tuples with the last parent varying fastest; each row holds
/// one probability per category of the child.
struct Cpt {
  std::size_t cardinality = 0;
  std::vector<double> table;

  std::size_t rows() const { return cardinality == 0 ? 0 : table.size() / cardinality; }
  std::span<const double> row(std::size_t r) const {
    return {table.data() + r * cardinality, cardinality};
  }
  std::span<double> row(std::size_t r) { return {table.data() + r * cardinality, cardinality}; }
  bool operator==(const Cpt&) const = default;
};

/// Possibly partial assignment of categories to nodes.
class Assignment {
 public:
  static constexpr std::int32_t kUnassigned = -1;

  Assignment() = default;
  explicit Assignment(std::size_t nodes) : values_(nodes, kUnassigned) {}
  explicit Assignment(std::vector<std::int32_t> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  bool assigned(NodeId i) const { return values_[i] != kUnassigned; }
  bool complete() const;
  CategoryIndex operator[](NodeId i) const { return static_cast<CategoryIndex>(values_[i]); }
  void set(NodeId i, CategoryIndex c) { values_[i] = static_cast<std::int32_t>(c); }
  void clear(NodeId i) { values_[i] = kUnassigned; }
  const std::vector<std::int32_t>& values() const { return values_; }

  bool operator==(const Assignment&) const = default;
  auto operator<=>(const Assignment&) const = default;

 private:
  std::vector<std::int32_t> values_;
};

class CausalNetwork {
 public:
  CausalNetwork() = default;

  /// Validates the description and stores it in topological order. Parent ids
  /// in `nodes` refer to positions in the given list; after construction they
  /// refer to the reordered positions.
  CausalNetwork(std::string name, std::vector<NodeSpec> nodes, std::vector<Cpt> cpts);

  const std::string& name() const { return name_; }
  std::size_t size() const { return nodes_.size(); }
  const NodeSpec& node(NodeId i) const { return nodes_[i]; }
  const Cpt& cpt(NodeId i) const { return cpts_[i]; }
  std::span<const NodeSpec> nodes() const { return nodes_; }
  std::span<const Cpt> cpts() const { return cpts_; }
  std::size_t cardinality(NodeId i) const { return nodes_[i].categories.size(); }

  std::size_t total_categories() const;
  std::size_t edge_count() const;
  std::size_t max_in_degree() const;

  std::optional<NodeId> find(std::string_view name) const;
  /// Throws UndeclaredVariable for unknown names.
  NodeId id_of(std::string_view name) const;
  /// Throws InvalidIntervention for unknown labels.
  CategoryIndex category_of(NodeId node, std::string_view label) const;

  /// CPT row selected by the parent values in `x` (parents must be assigned).
  std::size_t row_index(NodeId i, const Assignment& x) const;

  /// Conditional probability P(x_i | pa_i) under `x`.
  double conditional(NodeId i, const Assignment& x) const {
    return cpts_[i].row(row_index(i, x))[x[i]];
  }

  std::vector<std::vector<NodeId>> children() const;
  /// Marks every strict descendant of `i`.
  std::vector<bool> descendants(NodeId i) const;

  bool operator==(const CausalNetwork&) const = default;

 private:
  std::string name_;
  std::vector<NodeSpec> nodes_;
  std::vector<Cpt> cpts_;
};

/// Checks structure and parameters of a network description. Throws
/// CycleDetected, RowSumViolation, ArityMismatch or DanglingParent.
void validate(std::span<const NodeSpec> nodes, std::span<const Cpt> cpts);
void validate(const CausalNetwork& network);

/// Kahn's algorithm, ties broken by smallest node id.
std::vector<NodeId> topological_order(std::span<const NodeSpec> nodes);
std::vector<NodeId> topological_order(const CausalNetwork& network);

/// Product of P(x_i | pa_i). Throws PartialAssignment if `x` is not complete.
double joint_probability(const CausalNetwork& network, const Assignment& x);

Assignment ancestral_sample(const CausalNetwork& network, Rng& rng);

struct RandomNetworkOptions {
  std::size_t min_nodes = 1;
  std::size_t max_nodes = 12;
  std::size_t min_categories = 2;
  std::size_t max_categories = 4;
  std::size_t max_in_degree = 3;
};

/// Random DAG with Dirichlet(1) CPT rows. Nodes are named X0, X1, ... and
/// categories c0, c1, ...
CausalNetwork random_network(const RandomNetworkOptions& options, Rng& rng);

}  // namespace ivnmix
