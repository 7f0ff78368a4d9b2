#pragma once

// EM estimation of mixing proportions from joint samples when every component
// distribution is known.
//
// A sample x has positive probability only under phi and under Do(i, x_i) for
// each node i, so likelihoods and responsibilities are stored sparsely: one
// phi entry plus one entry per node. Repeated samples are merged and carry a
// multiplicity.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ivnmix/interventions.hpp"
#include "ivnmix/mixture.hpp"
#include "ivnmix/network.hpp"

namespace ivnmix {

inline constexpr std::size_t kDefaultEmRestarts = 50;
inline constexpr std::size_t kDefaultEmMaxIterations = 1000;
inline constexpr double kDefaultEmTolerance = 1e-8;

struct ComponentLikelihoods {
  CategoryLayout layout;
  /// Distinct samples, their multiplicity and the index of their first
  /// occurrence in the input.
  std::vector<Assignment> samples;
  std::vector<double> weights;
  std::vector<std::size_t> first_index;
  std::size_t total = 0;
  /// P_phi(x_s).
  std::vector<double> phi;
  /// P_{i, x_{s,i}}(x_s), row-major: samples x nodes.
  std::vector<double> forced;

  std::size_t size() const { return samples.size(); }
  std::size_t nodes() const { return layout.nodes(); }
  double forced_at(std::size_t s, NodeId i) const { return forced[s * nodes() + i]; }
  /// P_c(x_s) for a component index in canonical order.
  double at(std::size_t s, std::size_t component) const;
};

/// Posterior component probabilities, in the same sparse shape as the
/// likelihoods.
struct Responsibilities {
  std::vector<double> phi;
  std::vector<double> forced;  // samples x nodes
};

/// Throws EmptySampleSet.
ComponentLikelihoods component_likelihoods(const CausalNetwork& network, std::span<const Assignment> samples);

/// gamma_{s,c} = pi_c P_c(x_s) / sum_t pi_t P_t(x_s). Throws ZeroDenominator
/// with the input index of the first impossible sample.
Responsibilities e_step(const ComponentLikelihoods& lik, const MixtureSpec& spec);

/// Multiplicity-weighted column means of the responsibilities.
MixtureSpec m_step(const ComponentLikelihoods& lik, const Responsibilities& gamma);

/// sum_s log sum_c pi_c P_c(x_s) over all samples (with multiplicity).
double log_likelihood(const ComponentLikelihoods& lik, const MixtureSpec& spec);

struct EmOptions {
  std::size_t max_iterations = kDefaultEmMaxIterations;
  /// Stop once the mean per-sample log-likelihood gain drops below this.
  double tolerance = kDefaultEmTolerance;
};

struct EmRun {
  MixtureSpec spec;
  /// Log-likelihood of the initial spec and after every iteration.
  std::vector<double> trace;
  std::size_t iterations = 0;
  bool converged = false;

  double log_likelihood() const { return trace.back(); }
};

EmRun run_em(const ComponentLikelihoods& lik, const MixtureSpec& init, const EmOptions& options = {});
EmRun run_em(const CausalNetwork& network, std::span<const Assignment> samples, const MixtureSpec& init,
             const EmOptions& options = {});

/// Starting point of restart r: uniform over all components for r = 0,
/// otherwise the average of uniform and a Dirichlet(1) draw.
MixtureSpec em_initial_spec(const CategoryLayout& layout, std::size_t restart, Rng& rng);

struct EmResult {
  EmRun best;
  std::size_t best_run = 0;
  std::vector<EmRun> runs;
};

/// Runs `restarts` independent EM runs (restart r seeded with
/// derive_seed(seed, r)) and keeps the highest final log-likelihood, ties to
/// the lower index.
EmResult em_multi_start(const ComponentLikelihoods& lik, std::size_t restarts, std::uint64_t seed,
                        const EmOptions& options = {});

}  // namespace ivnmix
