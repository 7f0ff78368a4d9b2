#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "ivnmix/interventions.hpp"
#include "ivnmix/network.hpp"
#include "ivnmix/random.hpp"

namespace ivnmix {

/// Mixing proportions over the component set. Do targets missing from `pi`
/// have proportion zero.
struct MixtureSpec {
  double pi_phi = 1.0;
  std::map<DoTarget, double> pi;

  double weight(const DoTarget& t) const {
    const auto it = pi.find(t);
    return it == pi.end() ? 0.0 : it->second;
  }
  double weight(const InterventionId& id) const { return id.is_phi() ? pi_phi : weight(id.target()); }

  /// Proportions in canonical component order (phi first).
  std::vector<double> dense(const CategoryLayout& layout) const;
  /// Inverse of dense(); zero entries are dropped from the map.
  static MixtureSpec from_dense(const CategoryLayout& layout, const std::vector<double>& weights);
  /// Do proportions only, indexed by flat category; pi_phi = 1 - sum.
  static MixtureSpec from_do_weights(const CategoryLayout& layout, const std::vector<double>& x);

  bool operator==(const MixtureSpec&) const = default;
};

/// A generated experiment: ground-truth proportions and the per-node
/// category whose intervention is excluded (so every node keeps a zero).
struct ProblemInstance {
  MixtureSpec truth;
  std::vector<CategoryIndex> excluded;
  std::size_t n_ivn = 0;
  std::uint64_t seed = 0;

  bool operator==(const ProblemInstance&) const = default;
};

/// Throws NegativeProportion, SumNotOne or InvalidIntervention.
void validate_spec(const MixtureSpec& spec, const CausalNetwork& network);

/// Draws the latent component first, then ancestral-samples the matching
/// surgered network.
std::vector<Assignment> sample_mixture(const CausalNetwork& network, const MixtureSpec& spec,
                                       std::size_t m, Rng& rng);

/// Phi proportion used for every instance with interventions.
inline constexpr double kInstancePhiWeight = 0.2;

/// Random instance with `n_ivn` nonzero Do proportions. Every node gets one
/// uniformly chosen excluded category; the support is drawn uniformly among
/// the remaining pairs with positive base probability and weighted by a
/// Dirichlet(1) draw scaled to 0.8. Throws TooManyInterventions.
ProblemInstance generate_instance(const CausalNetwork& network, std::size_t n_ivn, std::uint64_t seed);

}  // namespace ivnmix
