#include "ivnmix/em.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>

#include "ivnmix/error.hpp"
#include "ivnmix/parallel.hpp"

namespace ivnmix {

double ComponentLikelihoods::at(std::size_t s, std::size_t component) const {
  if (component == 0) return phi[s];
  const DoTarget t = layout.unflatten(component - 1);
  return samples[s][t.node] == t.category ? forced_at(s, t.node) : 0.0;
}

ComponentLikelihoods component_likelihoods(const CausalNetwork& network, std::span<const Assignment> samples) {
  if (samples.empty()) throw EmptySampleSet("no samples");
  ComponentLikelihoods lik;
  lik.layout = CategoryLayout(network);
  lik.total = samples.size();

  std::map<Assignment, std::size_t> seen;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!samples[k].complete() || samples[k].size() != network.size()) throw PartialAssignment("sample " + std::to_string(k) + " is not a full assignment");
    const auto [it, inserted] = seen.try_emplace(samples[k], lik.samples.size());
    if (inserted) {
      lik.samples.push_back(samples[k]);
      lik.weights.push_back(1.0);
      lik.first_index.push_back(k);
    } else {
      lik.weights[it->second] += 1.0;
    }
  }

  const std::size_t n = network.size();
  lik.phi.assign(lik.size(), 0.0);
  lik.forced.assign(lik.size() * n, 0.0);
  parallel_for(lik.size(), [&](std::size_t s) {
    const Assignment& x = lik.samples[s];
    std::vector<double> factor(n);
    for (NodeId i = 0; i < n; ++i) factor[i] = network.conditional(i, x);
    // Under Do(i, x_i) the factor of node i becomes 1, so the likelihood is
    // the product of every other factor: prefix times suffix.
    std::vector<double> suffix(n + 1, 1.0);
    for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] * factor[i];
    double prefix = 1.0;
    for (NodeId i = 0; i < n; ++i) {
      lik.forced[s * n + i] = prefix * suffix[i + 1];
      prefix *= factor[i];
    }
    lik.phi[s] = prefix;
  });
  return lik;
}

namespace {

// Dense proportions in canonical component order.
std::vector<double> dense_weights(const ComponentLikelihoods& lik, const MixtureSpec& spec) {
  return spec.dense(lik.layout);
}

// pi_c P_c(x_s) for phi followed by every node's forced component.
void weighted_terms(const ComponentLikelihoods& lik, const std::vector<double>& w, std::size_t s,
                    std::vector<double>& terms) {
  const std::size_t n = lik.nodes();
  const Assignment& x = lik.samples[s];
  terms[0] = w[0] * lik.phi[s];
  for (NodeId i = 0; i < n; ++i) terms[1 + i] = w[1 + lik.layout.flat(i, x[i])] * lik.forced[s * n + i];
}

Responsibilities e_step_dense(const ComponentLikelihoods& lik, const std::vector<double>& w) {
  const std::size_t n = lik.nodes();
  Responsibilities gamma;
  gamma.phi.resize(lik.size());
  gamma.forced.resize(lik.size() * n);
  std::vector<double> terms(n + 1);
  for (std::size_t s = 0; s < lik.size(); ++s) {
    weighted_terms(lik, w, s, terms);
    double denom = 0.0;
    for (double t : terms) denom += t;
    if (!(denom > 0.0)) throw ZeroDenominator(lik.first_index[s]);
    gamma.phi[s] = terms[0] / denom;
    for (NodeId i = 0; i < n; ++i) gamma.forced[s * n + i] = terms[1 + i] / denom;
  }
  return gamma;
}

std::vector<double> m_step_dense(const ComponentLikelihoods& lik, const Responsibilities& gamma) {
  const std::size_t n = lik.nodes();
  std::vector<long double> acc(lik.layout.total() + 1, 0.0L);
  for (std::size_t s = 0; s < lik.size(); ++s) {
    const double w = lik.weights[s];
    const Assignment& x = lik.samples[s];
    acc[0] += w * gamma.phi[s];
    for (NodeId i = 0; i < n; ++i) acc[1 + lik.layout.flat(i, x[i])] += w * gamma.forced[s * n + i];
  }
  std::vector<double> out(acc.size());
  const auto total = static_cast<long double>(lik.total);
  for (std::size_t c = 0; c < acc.size(); ++c) out[c] = static_cast<double>(acc[c] / total);
  return out;
}

double log_likelihood_dense(const ComponentLikelihoods& lik, const std::vector<double>& w) {
  std::vector<double> terms(lik.nodes() + 1);
  long double sum = 0.0L;
  for (std::size_t s = 0; s < lik.size(); ++s) {
    weighted_terms(lik, w, s, terms);
    const double shift = *std::max_element(terms.begin(), terms.end());
    if (!(shift > 0.0)) throw ZeroDenominator(lik.first_index[s]);
    double scaled = 0.0;
    for (double t : terms) scaled += t / shift;
    sum += static_cast<long double>(lik.weights[s]) * (std::log(shift) + std::log(scaled));
  }
  return static_cast<double>(sum);
}

// Component index of every (sample, node) forced term.
std::vector<std::uint32_t> forced_columns(const ComponentLikelihoods& lik) {
  const std::size_t n = lik.nodes();
  std::vector<std::uint32_t> columns(lik.size() * n);
  for (std::size_t s = 0; s < lik.size(); ++s) {
    for (NodeId i = 0; i < n; ++i) {
      columns[s * n + i] = static_cast<std::uint32_t>(1 + lik.layout.flat(i, lik.samples[s][i]));
    }
  }
  return columns;
}

// One sweep over the samples: returns the log-likelihood of `w` and writes
// the next iterate (E-step followed by M-step) to `next`.
double em_pass(const ComponentLikelihoods& lik, const std::vector<std::uint32_t>& columns, const std::vector<double>& w,
               std::vector<double>& next, std::vector<double>& terms) {
  const std::size_t n = lik.nodes();
  next.assign(w.size(), 0.0);
  long double sum = 0.0L;
  for (std::size_t s = 0; s < lik.size(); ++s) {
    const double* forced = lik.forced.data() + s * n;
    const std::uint32_t* col = columns.data() + s * n;
    const double head = w[0] * lik.phi[s];
    double denom = head;
    double shift = head;
    for (NodeId i = 0; i < n; ++i) {
      terms[i] = w[col[i]] * forced[i];
      denom += terms[i];
      shift = std::max(shift, terms[i]);
    }
    if (!(denom > 0.0)) throw ZeroDenominator(lik.first_index[s]);
    const double log_denom = denom >= std::numeric_limits<double>::min() ? std::log(denom)
                                                                         : std::log(shift) + std::log(denom / shift);
    sum += static_cast<long double>(lik.weights[s]) * log_denom;
    const double scale = lik.weights[s] / denom;
    next[0] += head * scale;
    for (NodeId i = 0; i < n; ++i) next[col[i]] += terms[i] * scale;
  }
  const auto total = static_cast<double>(lik.total);
  for (double& v : next) v /= total;
  return static_cast<double>(sum);
}

}  // namespace

Responsibilities e_step(const ComponentLikelihoods& lik, const MixtureSpec& spec) {
  return e_step_dense(lik, dense_weights(lik, spec));
}

MixtureSpec m_step(const ComponentLikelihoods& lik, const Responsibilities& gamma) {
  if (lik.total == 0) throw EmptySampleSet("no samples");
  return MixtureSpec::from_dense(lik.layout, m_step_dense(lik, gamma));
}

double log_likelihood(const ComponentLikelihoods& lik, const MixtureSpec& spec) {
  return log_likelihood_dense(lik, dense_weights(lik, spec));
}

EmRun run_em(const ComponentLikelihoods& lik, const MixtureSpec& init, const EmOptions& options) {
  if (lik.total == 0) throw EmptySampleSet("no samples");
  const std::vector<std::uint32_t> columns = forced_columns(lik);
  std::vector<double> w = dense_weights(lik, init);
  std::vector<double> next;
  std::vector<double> terms(lik.nodes());
  EmRun run;
  run.trace.push_back(em_pass(lik, columns, w, next, terms));
  const auto total = static_cast<double>(lik.total);
  while (run.iterations < options.max_iterations) {
    w.swap(next);
    ++run.iterations;
    const double value = run.iterations == options.max_iterations ? log_likelihood_dense(lik, w)
                                                                  : em_pass(lik, columns, w, next, terms);
    const double gain = value - run.trace.back();
    run.trace.push_back(value);
    if (gain / total < options.tolerance) {
      run.converged = true;
      break;
    }
  }
  run.spec = MixtureSpec::from_dense(lik.layout, w);
  return run;
}

EmRun run_em(const CausalNetwork& network, std::span<const Assignment> samples, const MixtureSpec& init,
             const EmOptions& options) {
  if (samples.empty()) throw EmptySampleSet("no samples");
  return run_em(component_likelihoods(network, samples), init, options);
}

MixtureSpec em_initial_spec(const CategoryLayout& layout, std::size_t restart, Rng& rng) {
  const std::size_t k = layout.total() + 1;
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  if (restart > 0) {
    const std::vector<double> jitter = rng.dirichlet(k);
    for (std::size_t c = 0; c < k; ++c) w[c] = 0.5 * (w[c] + jitter[c]);
  }
  return MixtureSpec::from_dense(layout, w);
}

EmResult em_multi_start(const ComponentLikelihoods& lik, std::size_t restarts, std::uint64_t seed,
                        const EmOptions& options) {
  if (restarts == 0) throw RangeError("restarts", "must be at least 1");
  EmResult result;
  result.runs.resize(restarts);
  parallel_for(restarts, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    result.runs[r] = run_em(lik, em_initial_spec(lik.layout, r, rng), options);
  });
  for (std::size_t r = 1; r < restarts; ++r) {
    if (result.runs[r].log_likelihood() > result.runs[result.best_run].log_likelihood()) result.best_run = r;
  }
  result.best = result.runs[result.best_run];
  return result;
}

}  // namespace ivnmix
