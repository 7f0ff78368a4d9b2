#include "ivnmix/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "ivnmix/dimm.hpp"
#include "ivnmix/em.hpp"
#include "ivnmix/error.hpp"
#include "ivnmix/exact_recovery.hpp"
#include "ivnmix/marginals.hpp"

namespace ivnmix {

Metrics compute_metrics(const CategoryLayout& layout, const MixtureSpec& truth, const MixtureSpec& est,
                        std::optional<double> obj_truth, std::optional<double> obj_est) {
  const std::vector<double> t = truth.dense(layout);
  const std::vector<double> e = est.dense(layout);
  Metrics m;
  m.parameters = layout.total();
  if (m.parameters == 0) throw LayoutMismatch("layout has no categories");
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double d = std::abs(t[k] - e[k]);
    m.mse += d * d;
    m.mae += d;
    m.mabre = std::max(m.mabre, d);
  }
  m.mse /= static_cast<double>(m.parameters);
  m.mae /= static_cast<double>(m.parameters);
  if (obj_truth && obj_est) m.delta = std::abs(*obj_truth - *obj_est);
  return m;
}

std::uint64_t sampling_seed(std::uint64_t instance_seed, std::size_t samples) {
  return derive_seed(derive_seed(instance_seed, 1), samples);
}

std::uint64_t dimm_seed(std::uint64_t instance_seed) { return derive_seed(instance_seed, 2); }

std::uint64_t em_seed(std::uint64_t instance_seed) { return derive_seed(instance_seed, 3); }

namespace {

template <typename F>
auto staged(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(stage + ": " + e.what());
  }
}

std::string cell_label(std::size_t n_ivn, const std::optional<std::size_t>& m, std::uint64_t seed) {
  return "N_ivn=" + std::to_string(n_ivn) + " m=" + (m ? std::to_string(*m) : std::string("exact")) +
         " seed=" + std::to_string(seed);
}

// Exact cells sort before sampled ones.
auto row_key(const MetricsRow& r) {
  return std::make_tuple(r.n_ivn, r.samples.has_value(), r.samples.value_or(0), std::string(to_string(r.method)), r.seed);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  check_config(config);
  const CausalNetwork network = staged("load network", [&] { return load_network(config.network); });
  return run_experiment(config, network);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const CausalNetwork& network) {
  check_config(config);
  using Clock = std::chrono::steady_clock;
  const OracleBundle base_bundle = staged("marginals", [&] { return build_oracle_bundle(network); });
  const CategoryLayout layout = base_bundle.layout();

  ExperimentResult result;
  for (std::size_t n_ivn : config.nivn) {
    for (std::size_t k = 0; k < config.instances; ++k) {
      const std::uint64_t seed = config.seed + k;
      const ProblemInstance instance = staged("instance N_ivn=" + std::to_string(n_ivn),
                                              [&] { return generate_instance(network, n_ivn, seed); });
      for (const std::optional<std::size_t>& m : config.samples) {
        const std::string label = cell_label(n_ivn, m, seed);
        OracleBundle bundle = base_bundle;
        std::vector<Assignment> samples;
        staged("mixture marginals " + label, [&] {
          if (m) {
            Rng rng(sampling_seed(seed, *m));
            samples = sample_mixture(network, instance.truth, *m, rng);
            bundle.mix = empirical_marginals(samples, layout);
            bundle.mix_is_estimate = true;
            bundle.sample_count = *m;
          } else {
            bundle.mix = mixture_marginals_exact(bundle, instance.truth);
          }
        });
        const OptProblem prob = staged("problem " + label, [&] {
          return build_opt_problem(bundle, config.lambda, config.epsilon, config.regularizer);
        });
        const double obj_truth = objective(prob, prob.from_spec(instance.truth));

        for (Method method : config.methods) {
          if (method == Method::kEm && !m) continue;
          const std::string stage = std::string(to_string(method)) + " " + label;
          const auto start = Clock::now();
          MixtureSpec est;
          staged(stage, [&] {
            switch (method) {
              case Method::kExact:
                est = recover_all(bundle).spec;
                break;
              case Method::kDimm: {
                const SolverReport report = multi_start_solve(prob, config.restarts, dimm_seed(seed));
                est = prob.to_spec(report.x);
                result.traces.push_back({n_ivn, m, seed, report.trace, report.max_violation});
                break;
              }
              case Method::kEm: {
                EmOptions options;
                options.max_iterations = config.em_max_iterations;
                options.tolerance = config.em_tolerance;
                const ComponentLikelihoods lik = component_likelihoods(network, samples);
                const EmResult fit = em_multi_start(lik, config.em_restarts, em_seed(seed), options);
                est = fit.best.spec;
                EmTraceRecord record{n_ivn, m, seed, {}};
                for (const EmRun& run : fit.runs) record.runs.push_back(run.trace);
                result.em_traces.push_back(std::move(record));
                break;
              }
            }
          });
          const double seconds = std::chrono::duration<double>(Clock::now() - start).count();

          MetricsRow row;
          row.n_ivn = n_ivn;
          row.samples = m;
          row.method = method;
          row.seed = seed;
          row.seconds = seconds;
          row.metrics = compute_metrics(layout, instance.truth, est, obj_truth, objective(prob, prob.from_spec(est)));
          result.rows.push_back(row);
        }
      }
    }
  }
  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const MetricsRow& a, const MetricsRow& b) { return row_key(a) < row_key(b); });
  auto cell_order = [](const auto& a, const auto& b) {
    return std::make_tuple(a.n_ivn, a.samples.has_value(), a.samples.value_or(0), a.seed) <
           std::make_tuple(b.n_ivn, b.samples.has_value(), b.samples.value_or(0), b.seed);
  };
  std::stable_sort(result.traces.begin(), result.traces.end(), cell_order);
  std::stable_sort(result.em_traces.begin(), result.em_traces.end(), cell_order);
  return result;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows, bool timing) {
  std::string out = "N_ivn,m,method,MSE,MAE,MABRE,delta,seconds,seed\n";
  char buf[512];
  for (const MetricsRow& r : rows) {
    const std::string m = r.samples ? std::to_string(*r.samples) : "exact";
    char delta[32] = "";
    if (r.metrics.delta) std::snprintf(delta, sizeof delta, "%.5e", *r.metrics.delta);
    std::snprintf(buf, sizeof buf, "%zu,%s,%s,%.5e,%.5e,%.5e,%s,%.5e,%llu\n", r.n_ivn, m.c_str(), to_string(r.method),
                  r.metrics.mse, r.metrics.mae, r.metrics.mabre, delta, timing ? r.seconds : 0.0,
                  static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

std::string traces_csv(const std::vector<TraceRecord>& traces) {
  std::string out = "N_ivn,m,seed,step,objective\n";
  char buf[256];
  for (const TraceRecord& t : traces) {
    const std::string m = t.samples ? std::to_string(*t.samples) : "exact";
    for (std::size_t step = 0; step < t.trace.size(); ++step) {
      std::snprintf(buf, sizeof buf, "%zu,%s,%llu,%zu,%.5e\n", t.n_ivn, m.c_str(), static_cast<unsigned long long>(t.seed),
                    step, t.trace[step]);
      out += buf;
    }
  }
  return out;
}

}  // namespace ivnmix
