#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "ivnmix/dimm.hpp"
#include "ivnmix/em.hpp"
#include "ivnmix/error.hpp"
#include "ivnmix/exact_recovery.hpp"
#include "ivnmix/harness.hpp"
#include "ivnmix/marginals.hpp"
#include "ivnmix/mixture.hpp"
#include "ivnmix/model_io.hpp"

namespace ivnmix::cli {
namespace {

struct Options {
  std::string network;
  std::string config;
  std::string bundle;
  std::string truth;
  std::string est;
  std::string out;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> nivn;
  std::optional<std::string> samples;
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEpsilon;
  std::optional<std::size_t> restarts;
  std::optional<std::string> method;
};

class Emitter {
 public:
  explicit Emitter(std::ostream& out) : out_(out) {}

  void emit(const std::string& path, const std::string& text) const {
    if (path.empty() || path == "-") {
      out_ << text;
    } else {
      write_text_file(path, text);
    }
  }

 private:
  std::ostream& out_;
};

std::optional<std::size_t> parse_samples(const std::string& text) {
  if (text == "exact") return std::nullopt;
  std::size_t used = 0;
  std::size_t value = 0;
  try {
    value = std::stoul(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || value < 1) throw RangeError("samples", "expected \"exact\" or a positive count");
  return value;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> methods;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) methods.push_back(parse_method(item));
  if (methods.empty()) throw RangeError("method", "needs at least one method");
  return methods;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

int run_marginals(const Options& o, const Emitter& emit) {
  require(o.network, "--network");
  const CausalNetwork network = load_network(o.network);
  OracleBundle bundle = build_oracle_bundle(network);
  if (!o.truth.empty()) {
    const MixtureSpec spec = any_spec_from_json(read_text_file(o.truth), network.nodes());
    validate_spec(spec, network);
    bundle.mix = mixture_marginals_exact(bundle, spec);
  }
  emit.emit(o.out, bundle_to_json(bundle));
  return 0;
}

int run_simulate(const Options& o, const Emitter& emit) {
  require(o.network, "--network");
  const CausalNetwork network = load_network(o.network);
  const std::uint64_t seed = o.seed.value_or(0);
  const ProblemInstance instance = generate_instance(network, o.nivn.value_or(5), seed);
  emit.emit(o.out, instance_to_json(instance, network.nodes()));

  const std::optional<std::size_t> m = o.samples ? parse_samples(*o.samples) : std::nullopt;
  OracleBundle bundle = build_oracle_bundle(network);
  if (m) {
    Rng rng(sampling_seed(seed, *m));
    const std::vector<Assignment> samples = sample_mixture(network, instance.truth, *m, rng);
    if (!o.data.empty()) write_text_file(o.data, samples_to_csv(network, samples));
    bundle.mix = empirical_marginals(samples, bundle.layout());
    bundle.mix_is_estimate = true;
    bundle.sample_count = *m;
  } else {
    bundle.mix = mixture_marginals_exact(bundle, instance.truth);
  }
  if (!o.bundle.empty()) write_text_file(o.bundle, bundle_to_json(bundle));
  return 0;
}

int run_recover_exact(const Options& o, const Emitter& emit) {
  require(o.bundle, "--bundle");
  const OracleBundle bundle = bundle_from_json(read_text_file(o.bundle));
  const RecoveryResult result = recover_all(bundle);
  emit.emit(o.out, recovery_to_json(result, bundle.nodes));
  if (!result.ok()) {
    const NodeId failed = *result.failed_node();
    std::string message = "recovery failed at node '" + bundle.nodes[failed].name + "'";
    if (!result.nodes[failed].message.empty()) message += ": " + result.nodes[failed].message;
    throw Error(message);
  }
  return 0;
}

int run_recover_dimm(const Options& o, const Emitter& emit) {
  require(o.bundle, "--bundle");
  const OracleBundle bundle = bundle_from_json(read_text_file(o.bundle));
  const OptProblem prob = build_opt_problem(bundle, o.lambda, o.epsilon);
  const SolverReport report = multi_start_solve(prob, o.restarts.value_or(kDefaultRestarts), o.seed.value_or(0));
  emit.emit(o.out, solver_report_to_json(report, prob, bundle.nodes));
  return 0;
}

int run_recover_em(const Options& o, const Emitter& emit) {
  require(o.network, "--network");
  require(o.data, "--data");
  const CausalNetwork network = load_network(o.network);
  const std::vector<Assignment> samples = samples_from_csv(read_text_file(o.data), network);
  if (samples.empty()) throw EmptySampleSet("'" + o.data + "' holds no samples");
  const ComponentLikelihoods lik = component_likelihoods(network, samples);
  const EmResult result = em_multi_start(lik, o.restarts.value_or(kDefaultEmRestarts), o.seed.value_or(0));
  emit.emit(o.out, em_result_to_json(result, network.nodes()));
  return 0;
}

int run_evaluate(const Options& o, const Emitter& emit) {
  require(o.truth, "--truth");
  require(o.est, "--est");
  const std::string truth_text = read_text_file(o.truth);
  const std::string est_text = read_text_file(o.est);

  std::vector<NodeSpec> nodes;
  std::optional<OracleBundle> bundle;
  if (!o.bundle.empty()) {
    bundle = bundle_from_json(read_text_file(o.bundle));
    nodes = bundle->nodes;
  } else if (!o.network.empty()) {
    const CausalNetwork network = load_network(o.network);
    nodes.assign(network.nodes().begin(), network.nodes().end());
  } else {
    nodes = nodes_from_spec_json(truth_text);
    for (const NodeSpec& extra : nodes_from_spec_json(est_text)) {
      auto it = std::find_if(nodes.begin(), nodes.end(), [&](const NodeSpec& n) { return n.name == extra.name; });
      if (it == nodes.end()) {
        nodes.push_back(extra);
        continue;
      }
      for (const std::string& label : extra.categories) {
        if (std::find(it->categories.begin(), it->categories.end(), label) == it->categories.end()) {
          it->categories.push_back(label);
        }
      }
    }
  }
  std::vector<std::size_t> cards;
  for (const NodeSpec& n : nodes) cards.push_back(n.cardinality());
  const CategoryLayout layout(cards);

  const MixtureSpec truth = any_spec_from_json(truth_text, nodes);
  const MixtureSpec est = any_spec_from_json(est_text, nodes);
  std::optional<double> obj_truth;
  std::optional<double> obj_est;
  if (bundle && bundle->mix) {
    const OptProblem prob = build_opt_problem(*bundle, o.lambda, o.epsilon);
    obj_truth = objective(prob, prob.from_spec(truth));
    obj_est = objective(prob, prob.from_spec(est));
  }
  const Metrics m = compute_metrics(layout, truth, est, obj_truth, obj_est);

  char buf[512];
  std::snprintf(buf, sizeof buf, "N_c,MSE,MAE,MABRE,delta\n%zu,%.5e,%.5e,%.5e,", m.parameters, m.mse, m.mae, m.mabre);
  std::string text = buf;
  if (m.delta) {
    std::snprintf(buf, sizeof buf, "%.5e", *m.delta);
    text += buf;
  }
  text += "\n";
  emit.emit(o.out, text);
  return 0;
}

int run_experiment_command(const Options& o, const Emitter& emit, std::ostream& err) {
  require(o.config, "--config");
  const std::filesystem::path config_path(o.config);
  ExperimentConfig config = load_experiment_config(read_text_file(config_path), config_path.parent_path());
  if (!o.network.empty()) config.network = o.network;
  if (o.seed) config.seed = *o.seed;
  if (o.nivn) config.nivn = {*o.nivn};
  if (o.samples) config.samples = {parse_samples(*o.samples)};
  if (o.restarts) config.restarts = *o.restarts;
  if (o.method) config.methods = parse_methods(*o.method);
  if (!o.out.empty()) config.output = o.out;
  check_config(config);

  const ExperimentResult result = run_experiment(config);
  emit.emit(config.output, metrics_csv(result.rows, config.timing));
  if (!config.trace_output.empty()) write_text_file(config.trace_output, traces_csv(result.traces));
  err << "wrote " << result.rows.size() << " rows to " << (config.output == "-" ? "standard output" : config.output)
      << "\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Separate mixtures of perfect interventions on causal Bayesian networks", "ivnmix"};
  app.require_subcommand(1);
  Options o;

  auto add_network = [&](CLI::App* sub) { sub->add_option("--network", o.network, "network file (.bif or .json)"); };
  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", o.out, "output file (standard output when omitted)"); };
  auto add_solver = [&](CLI::App* sub) {
    sub->add_option("--lambda", o.lambda, "regularization weight")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--epsilon", o.epsilon, "relaxed zero threshold")->check(CLI::PositiveNumber);
  };

  CLI::App* marginals = app.add_subcommand("marginals", "dump base, interventional and mixture marginals");
  add_network(marginals);
  marginals->add_option("--truth", o.truth, "mixing proportions for the mixture table");
  add_out(marginals);

  CLI::App* simulate = app.add_subcommand("simulate", "generate an instance, its bundle and optional samples");
  add_network(simulate);
  simulate->add_option("--nivn", o.nivn, "number of weighted interventions");
  simulate->add_option("--seed", o.seed, "instance seed");
  simulate->add_option("--samples", o.samples, "sample count or \"exact\"");
  simulate->add_option("--bundle", o.bundle, "write the oracle bundle here");
  simulate->add_option("--data", o.data, "write the samples here (CSV)");
  add_out(simulate);

  CLI::App* exact = app.add_subcommand("recover-exact", "exact recovery from an oracle bundle");
  exact->add_option("--bundle", o.bundle, "oracle bundle");
  add_out(exact);

  CLI::App* dimm = app.add_subcommand("recover-dimm", "minimax estimate from an oracle bundle");
  dimm->add_option("--bundle", o.bundle, "oracle bundle");
  add_solver(dimm);
  dimm->add_option("--restarts", o.restarts, "number of random starts")->check(CLI::PositiveNumber);
  dimm->add_option("--seed", o.seed, "restart seed");
  add_out(dimm);

  CLI::App* em = app.add_subcommand("recover-em", "EM estimate from joint samples");
  add_network(em);
  em->add_option("--data", o.data, "samples (CSV)");
  em->add_option("--restarts", o.restarts, "number of EM restarts")->check(CLI::PositiveNumber);
  em->add_option("--seed", o.seed, "restart seed");
  add_out(em);

  CLI::App* evaluate = app.add_subcommand("evaluate", "error metrics between two sets of proportions");
  evaluate->add_option("--truth", o.truth, "reference proportions");
  evaluate->add_option("--est", o.est, "estimated proportions");
  evaluate->add_option("--bundle", o.bundle, "oracle bundle, enables the objective gap");
  add_network(evaluate);
  add_solver(evaluate);
  add_out(evaluate);

  CLI::App* experiment = app.add_subcommand("experiment", "config-driven sweep writing a metrics CSV");
  experiment->add_option("--config", o.config, "experiment configuration (JSON)");
  add_network(experiment);
  experiment->add_option("--seed", o.seed, "base seed");
  experiment->add_option("--nivn", o.nivn, "single N_ivn level");
  experiment->add_option("--samples", o.samples, "sample count or \"exact\"");
  experiment->add_option("--restarts", o.restarts, "DIMM restarts")->check(CLI::PositiveNumber);
  experiment->add_option("--method", o.method, "comma-separated methods: exact, dimm, em");
  add_out(experiment);

  const Emitter emit(out);
  CLI::App* active = nullptr;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    active = app.get_subcommands().front();
    if (active == marginals) return run_marginals(o, emit);
    if (active == simulate) return run_simulate(o, emit);
    if (active == exact) return run_recover_exact(o, emit);
    if (active == dimm) return run_recover_dimm(o, emit);
    if (active == em) return run_recover_em(o, emit);
    if (active == evaluate) return run_evaluate(o, emit);
    return run_experiment_command(o, emit, err);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  } catch (const RangeError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ivnmix::cli
