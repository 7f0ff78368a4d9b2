#include <cctype>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "ivnmix/error.hpp"
#include "ivnmix/marginals.hpp"
#include "ivnmix/mixture.hpp"
#include "ivnmix/model_io.hpp"
#include "ivnmix/random.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace ivnmix;

namespace {

const char* kCoinBif = R"(network coin {
}
variable X {
  type discrete [ 2 ] { H, T };
}
probability ( X ) {
  table 0.6, 0.4;
}
)";

// Splits BIF text into punctuation and word tokens, keeping their offsets.
std::vector<std::pair<std::size_t, std::size_t>> bif_tokens(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t k = 0;
  while (k < text.size()) {
    const char c = text[k];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++k;
    } else if (c == '/' && k + 1 < text.size() && text[k + 1] == '/') {
      while (k < text.size() && text[k] != '\n') ++k;
    } else if (std::string("{}()[];,|").find(c) != std::string::npos) {
      out.emplace_back(k, 1);
      ++k;
    } else {
      const std::size_t start = k;
      while (k < text.size() && !std::isspace(static_cast<unsigned char>(text[k])) &&
             std::string("{}()[];,|").find(text[k]) == std::string::npos) {
        ++k;
      }
      out.emplace_back(start, k - start);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("alarm parses with the published size") {
  const CausalNetwork net = load_network(IVNMIX_TEST_DATA "/alarm.bif");
  CHECK(net.size() == 37);
  CHECK(net.edge_count() == 46);
  CHECK(net.total_categories() == 105);
  CHECK(net.max_in_degree() == 4);
}

TEST_CASE("single binary variable") {
  const CausalNetwork net = parse_bif(kCoinBif);
  REQUIRE(net.size() == 1);
  CHECK(net.node(0).categories == std::vector<std::string>{"H", "T"});
  CHECK(net.cpt(0).table == std::vector<double>{0.6, 0.4});
}

TEST_CASE("chain2 file matches the fixture") {
  const CausalNetwork net = load_network(IVNMIX_TEST_DATA "/chain2.bif");
  const CausalNetwork fixture = oracle::chain2();
  CHECK(std::vector<NodeSpec>(net.nodes().begin(), net.nodes().end()) ==
        std::vector<NodeSpec>(fixture.nodes().begin(), fixture.nodes().end()));
  CHECK(std::vector<Cpt>(net.cpts().begin(), net.cpts().end()) ==
        std::vector<Cpt>(fixture.cpts().begin(), fixture.cpts().end()));
}

TEST_CASE("bif row checks") {
  SUBCASE("row summing to 0.9 is rejected") {
    std::string text = kCoinBif;
    text.replace(text.find("0.6, 0.4"), 8, "0.5, 0.4");
    CHECK_THROWS_AS(parse_bif(text), RowSumViolation);
  }
  SUBCASE("rounding noise is renormalized") {
    std::string text = kCoinBif;
    text.replace(text.find("0.6, 0.4"), 8, "0.6000003, 0.4");
    const CausalNetwork net = parse_bif(text);
    CHECK(net.cpt(0).table[0] + net.cpt(0).table[1] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("wrong number of entries") {
    std::string text = kCoinBif;
    text.replace(text.find("0.6, 0.4"), 8, "0.6, 0.3, 0.1");
    CHECK_THROWS_AS(parse_bif(text), TableShapeMismatch);
  }
  SUBCASE("unknown parent") {
    std::string text = read_text_file(IVNMIX_TEST_DATA "/chain2.bif");
    text.replace(text.find("( B | A )"), 9, "( B | Q )");
    CHECK_THROWS_AS(parse_bif(text), UndeclaredVariable);
  }
}

TEST_CASE("bif comments and properties are skipped") {
  const std::string text = R"(% leading comment
network coin {
  property version 1.0 ;
}
// another comment
variable X {
  type discrete [ 2 ] { H, T };
  property position = (10, 20) ;
}
probability ( X ) {
  table 0.6, 0.4; // trailing
}
)";
  const CausalNetwork net = parse_bif(text);
  CHECK(net.cpt(0).table == std::vector<double>{0.6, 0.4});
}

TEST_CASE("syntax errors report the line") {
  std::string text = kCoinBif;
  text.replace(text.find("table"), 5, "tabel");
  try {
    parse_bif(text);
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 7);
  }
}

TEST_CASE("every single-token deletion is rejected") {
  const std::string text = read_text_file(IVNMIX_TEST_DATA "/chain2.bif");
  const auto tokens = bif_tokens(text);
  REQUIRE(tokens.size() > 50);
  for (const auto& [start, length] : tokens) {
    std::string mutated = text;
    mutated.erase(start, length);
    CAPTURE(text.substr(start, length));
    CAPTURE(start);
    CHECK_THROWS_AS(parse_bif(mutated), Error);
  }
}

TEST_CASE("network json round trips") {
  SUBCASE("chain2") {
    const CausalNetwork net = oracle::chain2();
    CHECK(network_from_json(network_to_json(net)) == net);
  }
  SUBCASE("alarm") {
    const CausalNetwork net = load_network(IVNMIX_TEST_DATA "/alarm.bif");
    const CausalNetwork back = network_from_json(network_to_json(net));
    CHECK(back == net);
    CHECK(back.size() == 37);
    CHECK(parse_bif(network_to_bif(net)) == net);
  }
  SUBCASE("random networks reach a fixpoint in both formats") {
    Rng rng(99);
    for (int k = 0; k < 100; ++k) {
      const CausalNetwork net = random_network({}, rng);
      const std::string json_text = network_to_json(net);
      const CausalNetwork from_json = network_from_json(json_text);
      CHECK(from_json == net);
      CHECK(network_to_json(from_json) == json_text);
      const std::string bif_text = network_to_bif(net);
      const CausalNetwork from_bif = parse_bif(bif_text);
      CHECK(std::vector<Cpt>(from_bif.cpts().begin(), from_bif.cpts().end()) ==
            std::vector<Cpt>(net.cpts().begin(), net.cpts().end()));
      CHECK(network_to_bif(from_bif) == bif_text);
    }
  }
}

TEST_CASE("network json schema errors") {
  nlohmann::json doc = nlohmann::json::parse(network_to_json(oracle::chain2()));
  SUBCASE("missing cpts") {
    doc.erase("cpts");
    CHECK_THROWS_AS(network_from_json(doc.dump()), SchemaError);
  }
  SUBCASE("parent by unknown name") {
    doc["nodes"][1]["parents"] = {"Q"};
    CHECK_THROWS_AS(network_from_json(doc.dump()), Error);
  }
  SUBCASE("not json") { CHECK_THROWS_AS(network_from_json("{nodes"), SchemaError); }
}

TEST_CASE("spec and bundle documents round trip") {
  const CausalNetwork net = oracle::chain2();
  MixtureSpec spec;
  spec.pi_phi = 0.5;
  spec.pi[{0, 1}] = 0.25;
  spec.pi[{1, 0}] = 0.25;
  const MixtureSpec back = spec_from_json(spec_to_json(spec, net.nodes()), net.nodes());
  CHECK(back == spec);

  OracleBundle bundle = build_oracle_bundle(net);
  bundle.mix = mixture_marginals_exact(bundle, spec);
  CHECK(bundle_from_json(bundle_to_json(bundle)) == bundle);

  const ProblemInstance instance = generate_instance(net, 2, 17);
  CHECK(instance_from_json(instance_to_json(instance, net.nodes()), net.nodes()) == instance);
  CHECK(any_spec_from_json(instance_to_json(instance, net.nodes()), net.nodes()) == instance.truth);
}

TEST_CASE("sample csv round trips") {
  const CausalNetwork net = load_network(IVNMIX_TEST_DATA "/alarm.bif");
  Rng rng(3);
  std::vector<Assignment> samples;
  for (int k = 0; k < 200; ++k) samples.push_back(ancestral_sample(net, rng));
  CHECK(samples_from_csv(samples_to_csv(net, samples), net) == samples);
}

TEST_CASE("experiment config defaults and ranges") {
  SUBCASE("defaults") {
    const ExperimentConfig config = load_experiment_config(R"({"network": "alarm.bif"})", "/data");
    CHECK(config.lambda == 0.1);
    CHECK(config.epsilon == 1e-5);
    CHECK(config.restarts == 60);
    CHECK(config.network == "/data/alarm.bif");
    CHECK(config.nivn == std::vector<std::size_t>{5});
  }
  SUBCASE("lists and exact samples") {
    const ExperimentConfig config = load_experiment_config(
        R"({"network": "a.bif", "nivn": [0, 5, 9], "samples": ["exact", 1000], "methods": ["dimm", "em"]})");
    CHECK(config.nivn == std::vector<std::size_t>{0, 5, 9});
    REQUIRE(config.samples.size() == 2);
    CHECK_FALSE(config.samples[0].has_value());
    CHECK(config.samples[1] == std::optional<std::size_t>(1000));
    CHECK(config.methods == std::vector<Method>{Method::kDimm, Method::kEm});
  }
  SUBCASE("lambda out of range") {
    try {
      load_experiment_config(R"({"network": "a.bif", "lambda": 1.5})");
      FAIL("expected RangeError");
    } catch (const RangeError& e) {
      CHECK(e.field() == "lambda");
    }
  }
  SUBCASE("schema errors") {
    CHECK_THROWS_AS(load_experiment_config(R"({"nivn": 5})"), SchemaError);
    CHECK_THROWS_AS(load_experiment_config(R"({"network": "a.bif", "restarts": "many"})"), SchemaError);
    CHECK_THROWS_AS(load_experiment_config(R"({"network": "a.bif", "method": "sqp"})"), RangeError);
  }
}
