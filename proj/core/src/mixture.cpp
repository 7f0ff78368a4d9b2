#include "ivnmix/mixture.hpp"

#include <cmath>

#include "ivnmix/error.hpp"
#include "ivnmix/marginals.hpp"

namespace ivnmix {

std::vector<double> MixtureSpec::dense(const CategoryLayout& layout) const {
  std::vector<double> out(layout.total() + 1, 0.0);
  out[0] = pi_phi;
  for (const auto& [t, w] : pi) {
    if (t.node >= layout.nodes() || t.category >= layout.cardinality(t.node)) {
      throw LayoutMismatch("mixture component outside the category layout");
    }
    out[1 + layout.flat(t.node, t.category)] = w;
  }
  return out;
}

MixtureSpec MixtureSpec::from_dense(const CategoryLayout& layout, const std::vector<double>& weights) {
  if (weights.size() != layout.total() + 1) throw LayoutMismatch("dense weights do not match the layout");
  MixtureSpec spec;
  spec.pi_phi = weights[0];
  for (std::size_t k = 1; k < weights.size(); ++k) {
    if (weights[k] != 0.0) spec.pi[layout.unflatten(k - 1)] = weights[k];
  }
  return spec;
}

MixtureSpec MixtureSpec::from_do_weights(const CategoryLayout& layout, const std::vector<double>& x) {
  if (x.size() != layout.total()) throw LayoutMismatch("Do weights do not match the layout");
  MixtureSpec spec;
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    total += x[k];
    if (x[k] != 0.0) spec.pi[layout.unflatten(k)] = x[k];
  }
  spec.pi_phi = 1.0 - total;
  return spec;
}

void validate_spec(const MixtureSpec& spec, const CausalNetwork& network) {
  if (spec.pi_phi < 0.0) throw NegativeProportion("pi_phi is negative");
  double total = spec.pi_phi;
  for (const auto& [t, w] : spec.pi) {
    check_intervention(network, InterventionId::make_do(t.node, t.category));
    if (w < 0.0) {
      throw NegativeProportion("proportion of Do(" + network.node(t.node).name + "=" +
                               network.node(t.node).categories[t.category] + ") is negative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw SumNotOne("mixing proportions sum to " + std::to_string(total));
  }
}

std::vector<Assignment> sample_mixture(const CausalNetwork& network, const MixtureSpec& spec,
                                       std::size_t m, Rng& rng) {
  validate_spec(spec, network);
  const CategoryLayout layout(network);
  const std::vector<double> weights = spec.dense(layout);

  // Surgered networks are built lazily for components that actually occur.
  std::vector<std::optional<CausalNetwork>> components(weights.size());
  std::vector<Assignment> samples;
  samples.reserve(m);
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t z = rng.categorical(weights);
    if (!components[z]) components[z] = surgery(network, component_at(layout, z));
    samples.push_back(ancestral_sample(*components[z], rng));
  }
  return samples;
}

ProblemInstance generate_instance(const CausalNetwork& network, std::size_t n_ivn, std::uint64_t seed) {
  ProblemInstance instance;
  instance.n_ivn = n_ivn;
  instance.seed = seed;
  instance.excluded.assign(network.size(), 0);

  std::size_t capacity = 0;
  for (NodeId i = 0; i < network.size(); ++i) capacity += network.cardinality(i) - 1;
  if (n_ivn > capacity) {
    throw TooManyInterventions("requested " + std::to_string(n_ivn) + " interventions, at most " +
                               std::to_string(capacity) + " can satisfy the per-node exclusion");
  }

  Rng rng(seed);
  for (NodeId i = 0; i < network.size(); ++i) instance.excluded[i] = rng.index(network.cardinality(i));
  if (n_ivn == 0) {
    instance.truth.pi_phi = 1.0;
    return instance;
  }

  const MarginalTable base = exact_marginals(network);
  std::vector<DoTarget> eligible;
  for (NodeId i = 0; i < network.size(); ++i) {
    for (CategoryIndex a = 0; a < network.cardinality(i); ++a) {
      if (a != instance.excluded[i] && base(i, a) > kZeroMarginal) eligible.push_back({i, a});
    }
  }
  if (n_ivn > eligible.size()) {
    throw TooManyInterventions("requested " + std::to_string(n_ivn) + " interventions, only " +
                               std::to_string(eligible.size()) + " eligible pairs");
  }

  rng.shuffle(eligible);
  const std::vector<double> weights = rng.dirichlet(n_ivn);
  const double mass = 1.0 - kInstancePhiWeight;
  for (std::size_t k = 0; k < n_ivn; ++k) instance.truth.pi[eligible[k]] = mass * weights[k];
  instance.truth.pi_phi = kInstancePhiWeight;
  return instance;
}

}  // namespace ivnmix
