#include <cmath>
#include <vector>

#include "doctest.h"
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

void check_rows_sum_to_one(const MarginalTable& t) {
  for (NodeId j = 0; j < t.layout.nodes(); ++j) {
    double sum = 0.0;
    for (double v : t.node(j)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

}  // namespace

TEST_CASE("exact marginals of small networks") {
  const MarginalTable chain = exact_marginals(oracle::chain2());
  CHECK(chain(0, 1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(chain(1, 1) == doctest::Approx(0.62).epsilon(1e-15));

  const MarginalTable coin = exact_marginals(oracle::coin(0.3));
  CHECK(coin(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(coin(0, 1) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("alarm marginals cover 105 categories") {
  const CausalNetwork net = load_network(IVNMIX_TEST_DATA "/alarm.bif");
  const MarginalTable t = exact_marginals(net);
  CHECK(t.values.size() == 105);
  check_rows_sum_to_one(t);
  for (const MarginalTable& m : interventional_marginals(net)) check_rows_sum_to_one(m);
}

TEST_CASE("interventional marginals of chain2") {
  const CausalNetwork net = oracle::chain2();
  const std::vector<MarginalTable> all = interventional_marginals(net);
  REQUIRE(all.size() == 4);
  const CategoryLayout layout(net);
  const MarginalTable& a1 = all[layout.flat(0, 1)];
  CHECK(a1(1, 1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(a1(0, 1) == 1.0);
  const MarginalTable& b0 = all[layout.flat(1, 0)];
  CHECK(b0(0, 1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b0(1, 0) == 1.0);

  const OracleBundle bundle = build_oracle_bundle(net);
  CHECK(bundle.component(InterventionId::phi()) == bundle.base);
}

TEST_CASE("exact marginals agree with enumeration") {
  Rng rng(8);
  int checked = 0;
  while (checked < 30) {
    const CausalNetwork net = random_network({}, rng);
    if (oracle::joint_size(net) > 20000) continue;
    ++checked;
    CHECK(oracle::max_abs_diff(exact_marginals(net).values, oracle::marginals(net)) <= 1e-12);
    const CategoryLayout layout(net);
    const std::vector<MarginalTable> all = interventional_marginals(net);
    for (std::size_t f = 0; f < layout.total(); ++f) {
      const DoTarget t = layout.unflatten(f);
      CHECK(oracle::max_abs_diff(all[f].values, oracle::marginals(net, std::make_pair(t.node, t.category))) <= 1e-12);
    }
  }
}

TEST_CASE("empirical marginals count samples") {
  const CausalNetwork net = oracle::chain2();
  const CategoryLayout layout(net);
  const std::vector<Assignment> two{Assignment(std::vector<std::int32_t>{1, 0}), Assignment(std::vector<std::int32_t>{1, 1})};
  const MarginalTable t = empirical_marginals(two, layout);
  CHECK(t(0, 1) == 1.0);
  CHECK(t(1, 1) == 0.5);

  const MarginalTable one = empirical_marginals(std::span(two).first(1), layout);
  CHECK(one.values == std::vector<double>{0.0, 1.0, 1.0, 0.0});

  CHECK_THROWS_AS(empirical_marginals(std::vector<Assignment>{}, layout), EmptySampleSet);
}

TEST_CASE("mixture marginals") {
  const CausalNetwork net = oracle::chain2();
  const OracleBundle bundle = build_oracle_bundle(net);

  SUBCASE("half phi, half A=1") {
    const MarginalTable t = mixture_marginals_exact(bundle, half_a1());
    CHECK(t(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(t(1, 1) == doctest::Approx(0.76).epsilon(1e-15));
  }
  SUBCASE("pure phi is the base table") {
    CHECK(oracle::max_abs_diff(mixture_marginals_exact(bundle, MixtureSpec{}).values, bundle.base.values) == 0.0);
  }
  SUBCASE("single coin") {
    const OracleBundle c = build_oracle_bundle(oracle::coin(0.6));
    MixtureSpec spec;
    spec.pi_phi = 0.8;
    spec.pi[{0, 0}] = 0.2;
    CHECK(mixture_marginals_exact(c, spec)(0, 0) == doctest::Approx(0.68).epsilon(1e-15));
  }
  SUBCASE("missing component tables") {
    const std::vector<MarginalTable> none;
    CHECK_THROWS_AS(mixture_marginals_exact(bundle.base, none, half_a1()), MissingComponent);
  }
  SUBCASE("sampled marginals converge") {
    Rng rng(77);
    const std::vector<Assignment> samples = sample_mixture(net, half_a1(), 1000000, rng);
    const MarginalTable est = empirical_marginals(samples, bundle.layout());
    const MarginalTable exact = mixture_marginals_exact(bundle, half_a1());
    CHECK(oracle::max_abs_diff(est.values, exact.values) <= 0.005);
    CHECK(oracle::max_abs_diff(est.values, exact.values) <= 5.0 * std::sqrt(1e-6));
  }
}

TEST_CASE("mixture marginals are linear and match enumeration") {
  Rng rng(12);
  int checked = 0;
  while (checked < 20) {
    const CausalNetwork net = random_network({}, rng);
    if (oracle::joint_size(net) > 4096 || net.total_categories() < 3) continue;
    ++checked;
    const OracleBundle bundle = build_oracle_bundle(net);
    const CategoryLayout& layout = bundle.layout();
    const MixtureSpec s1 = MixtureSpec::from_dense(layout, rng.dirichlet(layout.total() + 1));
    const MixtureSpec s2 = MixtureSpec::from_dense(layout, rng.dirichlet(layout.total() + 1));
    const std::vector<double> d1 = s1.dense(layout), d2 = s2.dense(layout);
    std::vector<double> mixed(d1.size());
    for (std::size_t k = 0; k < d1.size(); ++k) mixed[k] = 0.3 * d1[k] + 0.7 * d2[k];
    const MarginalTable m1 = mixture_marginals_exact(bundle, s1);
    const MarginalTable m2 = mixture_marginals_exact(bundle, s2);
    const MarginalTable m = mixture_marginals_exact(bundle, MixtureSpec::from_dense(layout, mixed));
    for (std::size_t k = 0; k < m.values.size(); ++k) {
      CHECK(std::abs(m.values[k] - (0.3 * m1.values[k] + 0.7 * m2.values[k])) <= 1e-12);
    }
    CHECK(oracle::max_abs_diff(m1.values, oracle::mixture_marginals(net, s1)) <= 1e-12);
    check_rows_sum_to_one(m);
  }
}
