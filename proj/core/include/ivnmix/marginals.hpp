#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ivnmix/interventions.hpp"
#include "ivnmix/mixture.hpp"
#include "ivnmix/network.hpp"

namespace ivnmix {

/// Base probabilities at or below this are treated as zero categories.
inline constexpr double kZeroMarginal = 1e-12;

/// Single-node marginals P(X_j = b) for every node and category.
struct MarginalTable {
  CategoryLayout layout;
  std::vector<double> values;

  MarginalTable() = default;
  explicit MarginalTable(CategoryLayout l) : layout(std::move(l)), values(layout.total(), 0.0) {}

  bool empty() const { return values.empty(); }
  double operator()(NodeId j, CategoryIndex b) const { return values[layout.flat(j, b)]; }
  double& operator()(NodeId j, CategoryIndex b) { return values[layout.flat(j, b)]; }
  std::span<const double> node(NodeId j) const {
    return {values.data() + layout.offset(j), layout.cardinality(j)};
  }

  bool operator==(const MarginalTable&) const = default;
};

/// Everything a recovery method may look at: the graph, base and
/// interventional marginals, and the (possibly estimated) mixture marginals.
struct OracleBundle {
  std::vector<NodeSpec> nodes;  // topological order
  MarginalTable base;
  std::vector<MarginalTable> interventional;  // indexed by flat (i, a)
  std::optional<MarginalTable> mix;
  bool mix_is_estimate = false;
  std::optional<std::size_t> sample_count;

  const CategoryLayout& layout() const { return base.layout; }
  /// Marginals under Do(i, a); phi maps to the base table.
  const MarginalTable& component(const InterventionId& id) const;
  /// Categories with zero base probability; their proportions are fixed to 0.
  bool excluded(NodeId j, CategoryIndex b) const { return base(j, b) <= kZeroMarginal; }
  std::vector<bool> excluded_mask() const;
  /// Throws MissingMarginal when a table is absent or mis-shaped.
  void check_complete() const;

  bool operator==(const OracleBundle&) const = default;
};

/// Exact marginals by variable elimination over the query's ancestors, with a
/// min-fill elimination order.
MarginalTable exact_marginals(const CausalNetwork& network);

/// Exact marginals of every surgered component network, indexed by flat
/// (i, a). Phi is the base table and is not repeated here.
std::vector<MarginalTable> interventional_marginals(const CausalNetwork& network);

/// Relative category frequencies. Throws EmptySampleSet.
MarginalTable empirical_marginals(std::span<const Assignment> samples, const CategoryLayout& layout);

/// p_mix = sum over Do components of p_{i,a} pi_{i,a} + p pi_phi. Throws
/// MissingComponent when a weighted component has no table.
MarginalTable mixture_marginals_exact(const MarginalTable& base,
                                      std::span<const MarginalTable> interventional,
                                      const MixtureSpec& spec);
MarginalTable mixture_marginals_exact(const OracleBundle& bundle, const MixtureSpec& spec);

/// Base and interventional tables of `network`, without mixture marginals.
OracleBundle build_oracle_bundle(const CausalNetwork& network);

}  // namespace ivnmix
