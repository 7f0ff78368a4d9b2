#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ivnmix/dimm.hpp"
#include "ivnmix/error.hpp"
#include "ivnmix/marginals.hpp"
#include "ivnmix/mixture.hpp"
#include "ivnmix/model_io.hpp"
#include "ivnmix/random.hpp"
#include "oracles.hpp"

using namespace ivnmix;

namespace {

MixtureSpec half_a1() {
  MixtureSpec spec;
  spec.pi_phi = 0.5;
  spec.pi[{0, 1}] = 0.5;
  return spec;
}

OracleBundle with_mix(const CausalNetwork& net, const MixtureSpec& spec) {
  OracleBundle bundle = build_oracle_bundle(net);
  bundle.mix = mixture_marginals_exact(bundle, spec);
  return bundle;
}

// Objective from enumerated marginals: for every node j, the squared
// deviation between the mixture marginal and the base marginal predicted by
// the Do proportions of nodes up to j, maximised over j, plus the penalty.
double reference_objective(const CausalNetwork& net, const MixtureSpec& mix, const std::vector<double>& flat_x,
                           double lambda) {
  const CategoryLayout layout(net);
  const std::vector<double> base = oracle::marginals(net);
  const std::vector<double> target = oracle::mixture_marginals(net, mix);
  std::vector<std::vector<double>> forced(layout.total());
  for (std::size_t f = 0; f < layout.total(); ++f) {
    const DoTarget t = layout.unflatten(f);
    forced[f] = oracle::marginals(net, std::make_pair(t.node, t.category));
  }
  double worst = 0.0;
  for (NodeId j = 0; j < net.size(); ++j) {
    double f = 0.0;
    for (CategoryIndex b = 0; b < net.cardinality(j); ++b) {
      const std::size_t row = layout.flat(j, b);
      if (base[row] <= 1e-12) continue;
      double r = -(target[row] - base[row]);
      const std::size_t end = layout.offset(j) + layout.cardinality(j);
      for (std::size_t v = 0; v < end; ++v) {
        if (base[v] <= 1e-12) continue;
        r += (forced[v][row] - base[row]) * flat_x[v];
      }
      f += r * r;
    }
    worst = std::max(worst, f);
  }
  double norm = 0.0;
  for (double v : flat_x) norm += v * v;
  return worst + lambda * norm;
}

}  // namespace

TEST_CASE("chain2 problem shapes") {
  const OptProblem prob = build_opt_problem(with_mix(oracle::chain2(), half_a1()));
  REQUIRE(prob.node_count() == 2);
  CHECK(prob.blocks[0].rows.size() == 2);
  CHECK(prob.blocks[0].columns == 2);
  CHECK(prob.blocks[1].rows.size() == 2);
  CHECK(prob.blocks[1].columns == 4);
  CHECK(prob.dimension() == 4);
  CHECK(prob.lambda == 0.1);
  CHECK(prob.epsilon == 1e-5);
}

TEST_CASE("objective values on chain2") {
  const OptProblem prob = build_opt_problem(with_mix(oracle::chain2(), half_a1()));
  const std::vector<double> truth{0.0, 0.5, 0.0, 0.0};
  for (double r : block_residuals(prob, truth)) CHECK(r <= 1e-30);
  CHECK(objective(prob, truth) == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(objective(prob, std::vector<double>(4, 0.0)) == doctest::Approx(0.08).epsilon(1e-14));

  OracleBundle flat = build_oracle_bundle(oracle::chain2());
  flat.mix = flat.base;
  CHECK(objective(build_opt_problem(flat), std::vector<double>(4, 0.0)) == 0.0);

  CHECK_THROWS_AS(objective(prob, std::vector<double>(3, 0.0)), LayoutMismatch);
  CHECK_THROWS_AS(build_opt_problem(flat, 1.5), RangeError);
}

TEST_CASE("objective agrees with the enumeration reference") {
  Rng rng(21);
  int checked = 0;
  while (checked < 20) {
    const CausalNetwork net = random_network({}, rng);
    if (oracle::joint_size(net) > 4096) continue;
    ++checked;
    const ProblemInstance inst = generate_instance(net, std::min<std::size_t>(3, net.total_categories() - net.size()), rng.next());
    const OptProblem prob = build_opt_problem(with_mix(net, inst.truth));
    const std::vector<double> x = random_start(prob, rng);
    const std::vector<double> flat = prob.to_flat(x);
    CHECK(objective(prob, x) == doctest::Approx(reference_objective(net, inst.truth, flat, 0.1)).epsilon(1e-10));
    CHECK(objective(prob, prob.from_spec(inst.truth)) ==
          doctest::Approx(reference_objective(net, inst.truth, prob.to_flat(prob.from_spec(inst.truth)), 0.1)).epsilon(1e-10));
  }
}

TEST_CASE("constraint violations") {
  const OptProblem prob = build_opt_problem(with_mix(oracle::chain2(), half_a1()));
  CHECK(constraint_violations(prob, std::vector<double>{0.0, 0.5, 0.0, 0.0}).max() == 0.0);

  const ConstraintViolations spread = constraint_violations(prob, std::vector<double>(4, 0.01));
  REQUIRE(spread.relaxed_zero.size() == 2);
  for (double v : spread.relaxed_zero) CHECK(v == doctest::Approx(0.01 - 1e-5).epsilon(1e-12));

  const ConstraintViolations heavy = constraint_violations(prob, std::vector<double>{0.0, 0.6, 0.0, 0.6});
  CHECK(heavy.mass == doctest::Approx(0.2).epsilon(1e-12));

  const ConstraintViolations negative = constraint_violations(prob, std::vector<double>{-0.1, 0.5, 0.0, 0.0});
  CHECK(negative.nonnegativity[0] == doctest::Approx(-0.1));
}

TEST_CASE("gradient matches central differences") {
  Rng rng(5);
  const CausalNetwork net = load_network(IVNMIX_TEST_DATA "/alarm.bif");
  const ProblemInstance inst = generate_instance(net, 9, 3);
  for (Regularizer reg : {Regularizer::kSquaredNorm, Regularizer::kNorm}) {
    const OptProblem prob = build_opt_problem(with_mix(net, inst.truth), 0.1, 1e-5, reg);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x = random_start(prob, rng);
      for (double& v : x) v += 0.01;
      const std::vector<double> r = block_residuals(prob, x);
      std::vector<double> sorted = r;
      std::sort(sorted.begin(), sorted.end());
      if (sorted.size() > 1 && sorted.back() - sorted[sorted.size() - 2] < 1e-6) continue;
      const std::vector<double> g = objective_gradient(prob, x);
      const double h = 1e-6;
      for (std::size_t k = 0; k < x.size(); k += 7) {
        std::vector<double> up = x, down = x;
        up[k] += h;
        down[k] -= h;
        const double fd = (objective(prob, up) - objective(prob, down)) / (2 * h);
        CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, std::abs(g[k])));
      }
    }
  }
}

TEST_CASE("solving chain2") {
  SUBCASE("no penalty recovers the truth") {
    const OptProblem prob = build_opt_problem(with_mix(oracle::chain2(), half_a1()), 0.0);
    const SolverReport report = solve(prob);
    CHECK(report.max_violation <= 1e-6);
    for (double r : report.residuals) CHECK(r <= 1e-10);
    const std::vector<double> expect{0.0, 0.5, 0.0, 0.0};
    CHECK(oracle::max_abs_diff(report.x, expect) <= 1e-4);
  }
  SUBCASE("pure phi stays at zero") {
    OracleBundle bundle = build_oracle_bundle(oracle::chain2());
    bundle.mix = bundle.base;
    const SolverReport report = solve(build_opt_problem(bundle));
    for (double v : report.x) CHECK(std::abs(v) <= 1e-4);
  }
}

TEST_CASE("alarm solve reaches the truth's objective") {
  const CausalNetwork net = load_network(IVNMIX_TEST_DATA "/alarm.bif");
  const ProblemInstance inst = generate_instance(net, 5, 1);
  const OptProblem prob = build_opt_problem(with_mix(net, inst.truth));
  Rng rng(derive_seed(7, 0));
  const SolverReport report = solve(prob, random_start(prob, rng));
  CHECK(report.objective <= objective(prob, prob.from_spec(inst.truth)) + 1e-12);
  CHECK(report.max_violation <= 1e-6);
  for (std::size_t k = 1; k < report.trace.size(); ++k) CHECK(report.trace[k] <= report.trace[k - 1]);

  const SolverReport one = multi_start_solve(prob, 1, 7);
  CHECK(one.x == report.x);
  CHECK(one.objective == report.objective);
}

TEST_CASE("more restarts never do worse") {
  Rng rng(44);
  RandomNetworkOptions options;
  options.max_nodes = 8;
  for (int k = 0; k < 5; ++k) {
    const CausalNetwork net = random_network(options, rng);
    const ProblemInstance inst = generate_instance(net, 1, rng.next());
    OracleBundle bundle = build_oracle_bundle(net);
    Rng noise(k);
    const std::vector<Assignment> samples = sample_mixture(net, inst.truth, 500, noise);
    bundle.mix = empirical_marginals(samples, bundle.layout());
    bundle.mix_is_estimate = true;
    const OptProblem prob = build_opt_problem(bundle);
    const SolverReport one = multi_start_solve(prob, 1, 3);
    const SolverReport many = multi_start_solve(prob, 8, 3);
    CHECK(many.objective <= one.objective);
    CHECK(many.max_violation <= 1e-6);
  }
}

TEST_CASE("support thresholding") {
  const OptProblem prob = build_opt_problem(with_mix(oracle::chain2(), half_a1()));
  const std::vector<double> x{0.0, 0.5, 0.0, 0.0};
  const std::vector<DoTarget> support = threshold_support(prob, x);
  REQUIRE(support.size() == 1);
  CHECK(support[0] == DoTarget{0, 1});
  CHECK(threshold_support(prob, std::vector<double>(4, 0.0005)).empty());
  CHECK(threshold_support(prob, std::vector<double>{0.0, 1e-7, 0.0, 2e-9}, 0.0).size() == 2);
}

TEST_CASE("solver round trips specs") {
  const OptProblem prob = build_opt_problem(with_mix(oracle::chain2(), half_a1()));
  const MixtureSpec spec = prob.to_spec(std::vector<double>{0.0, 0.5, 0.0, 0.0});
  CHECK(spec == half_a1());
  CHECK(prob.from_spec(spec) == std::vector<double>{0.0, 0.5, 0.0, 0.0});
}
