#include "ivnmix/dimm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ivnmix/error.hpp"
#include "ivnmix/parallel.hpp"

namespace ivnmix {

std::vector<double> OptProblem::to_flat(std::span<const double> x) const {
  if (x.size() != dimension()) throw LayoutMismatch("solution vector does not match the problem layout");
  std::vector<double> flat(layout.total(), 0.0);
  for (std::size_t k = 0; k < variables.size(); ++k) {
    flat[layout.flat(variables[k].node, variables[k].category)] = x[k];
  }
  return flat;
}

std::vector<double> OptProblem::from_flat(std::span<const double> flat) const {
  if (flat.size() != layout.total()) throw LayoutMismatch("flat proportions do not match the layout");
  std::vector<double> x(dimension());
  for (std::size_t k = 0; k < variables.size(); ++k) {
    x[k] = flat[layout.flat(variables[k].node, variables[k].category)];
  }
  return x;
}

std::vector<double> OptProblem::from_spec(const MixtureSpec& spec) const {
  std::vector<double> x(dimension());
  for (std::size_t k = 0; k < variables.size(); ++k) x[k] = spec.weight(variables[k]);
  return x;
}

MixtureSpec OptProblem::to_spec(std::span<const double> x) const {
  return MixtureSpec::from_do_weights(layout, to_flat(x));
}

OptProblem build_opt_problem(const OracleBundle& bundle, double lambda, double epsilon, Regularizer regularizer) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw RangeError("lambda", "must lie in [0, 1]");
  if (!(epsilon > 0.0)) throw RangeError("epsilon", "must be positive");
  bundle.check_complete();
  if (!bundle.mix) throw MissingMarginal("bundle has no mixture marginals");

  OptProblem prob;
  prob.layout = bundle.layout();
  prob.lambda = lambda;
  prob.epsilon = epsilon;
  prob.regularizer = regularizer;

  const CategoryLayout& layout = prob.layout;
  std::vector<std::size_t> column_of(layout.total(), std::numeric_limits<std::size_t>::max());
  prob.node_begin.push_back(0);
  for (NodeId j = 0; j < layout.nodes(); ++j) {
    for (CategoryIndex b = 0; b < layout.cardinality(j); ++b) {
      if (bundle.excluded(j, b)) continue;
      column_of[layout.flat(j, b)] = prob.variables.size();
      prob.variables.push_back({j, b});
    }
    prob.node_begin.push_back(prob.variables.size());
  }

  for (NodeId j = 0; j < layout.nodes(); ++j) {
    OptBlock block;
    block.node = j;
    block.columns = prob.node_begin[j + 1];
    for (CategoryIndex beta = 0; beta < layout.cardinality(j); ++beta) {
      if (bundle.excluded(j, beta)) continue;
      const double p = bundle.base(j, beta);
      block.rows.push_back(beta);
      block.rhs.push_back((*bundle.mix)(j, beta) - p);
      for (std::size_t c = 0; c < block.columns; ++c) {
        const DoTarget& v = prob.variables[c];
        const MarginalTable& under = bundle.interventional[layout.flat(v.node, v.category)];
        block.matrix.push_back(under(j, beta) - p);
      }
    }
    prob.blocks.push_back(std::move(block));
  }
  return prob;
}

namespace {

void check_layout(const OptProblem& prob, std::span<const double> x) {
  if (x.size() != prob.dimension()) {
    throw LayoutMismatch("vector of size " + std::to_string(x.size()) + " for a problem of dimension " +
                         std::to_string(prob.dimension()));
  }
}

double regularizer_value(const OptProblem& prob, std::span<const double> x) {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  return prob.regularizer == Regularizer::kSquaredNorm ? sq : std::sqrt(sq);
}

std::vector<double> block_residual_vector(const OptBlock& block, std::span<const double> x) {
  std::vector<double> r(block.rows.size());
  for (std::size_t row = 0; row < block.rows.size(); ++row) {
    double acc = -block.rhs[row];
    for (std::size_t c = 0; c < block.columns; ++c) acc += block.at(row, c) * x[c];
    r[row] = acc;
  }
  return r;
}

}  // namespace

std::vector<double> block_residuals(const OptProblem& prob, std::span<const double> x) {
  check_layout(prob, x);
  std::vector<double> out;
  out.reserve(prob.blocks.size());
  for (const OptBlock& block : prob.blocks) {
    double sq = 0.0;
    for (double r : block_residual_vector(block, x)) sq += r * r;
    out.push_back(sq);
  }
  return out;
}

double objective(const OptProblem& prob, std::span<const double> x) {
  const std::vector<double> f = block_residuals(prob, x);
  const double worst = f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
  return worst + prob.lambda * regularizer_value(prob, x);
}

std::vector<double> objective_gradient(const OptProblem& prob, std::span<const double> x) {
  const std::vector<double> f = block_residuals(prob, x);
  std::vector<double> grad(prob.dimension(), 0.0);
  if (!f.empty()) {
    const auto active = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
    const OptBlock& block = prob.blocks[active];
    const std::vector<double> r = block_residual_vector(block, x);
    for (std::size_t row = 0; row < block.rows.size(); ++row) {
      for (std::size_t c = 0; c < block.columns; ++c) grad[c] += 2.0 * block.at(row, c) * r[row];
    }
  }
  const double reg = regularizer_value(prob, x);
  for (std::size_t k = 0; k < grad.size(); ++k) {
    if (prob.regularizer == Regularizer::kSquaredNorm) {
      grad[k] += 2.0 * prob.lambda * x[k];
    } else if (reg > 0.0) {
      grad[k] += prob.lambda * x[k] / reg;
    }
  }
  return grad;
}

double ConstraintViolations::max() const {
  double worst = mass;
  for (double v : nonnegativity) worst = std::max(worst, -v);
  for (double v : relaxed_zero) worst = std::max(worst, v);
  return worst;
}

ConstraintViolations constraint_violations(const OptProblem& prob, std::span<const double> x) {
  check_layout(prob, x);
  ConstraintViolations out;
  double total = 0.0;
  for (double v : x) {
    out.nonnegativity.push_back(std::min(0.0, v));
    total += v;
  }
  out.mass = std::max(0.0, total - 1.0);
  for (NodeId j = 0; j < prob.node_count(); ++j) {
    const auto first = x.begin() + static_cast<std::ptrdiff_t>(prob.node_begin[j]);
    const auto last = x.begin() + static_cast<std::ptrdiff_t>(prob.node_begin[j + 1]);
    const double lowest = first == last ? 0.0 : *std::min_element(first, last);
    out.relaxed_zero.push_back(std::max(0.0, lowest - prob.epsilon));
  }
  return out;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Log-barrier method for the convex subproblem obtained by fixing, for every
// node, which coordinate must stay below epsilon:
//
//   minimize t + lambda R(x)
//   s.t. f_j(x) <= t,  x >= 0,  sum x <= 1,  x_{sel_j} <= epsilon.
class BarrierSolver {
 public:
  struct Outcome {
    VectorXd x;
    double objective = 0.0;
    std::vector<double> trace;
    std::vector<double> zero_duals;
    std::size_t iterations = 0;
    bool converged = false;
  };

  BarrierSolver(const OptProblem& prob, const SolverOptions& options) : prob_(prob), options_(options) {
    for (const OptBlock& block : prob.blocks) {
      MatrixXd a(block.rows.size(), block.columns);
      for (std::size_t r = 0; r < block.rows.size(); ++r) {
        for (std::size_t c = 0; c < block.columns; ++c) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = block.at(r, c);
      }
      VectorXd b = Eigen::Map<const VectorXd>(block.rhs.data(), static_cast<Eigen::Index>(block.rhs.size()));
      gram_.push_back(a.transpose() * a);
      a_.push_back(std::move(a));
      b_.push_back(std::move(b));
    }
  }

  Outcome run(const std::vector<std::size_t>& selection, VectorXd x) const {
    const auto n = static_cast<Eigen::Index>(prob_.dimension());
    const double eps = prob_.epsilon;
    const double floor = eps * 1e-2;
    for (Eigen::Index i = 0; i < n; ++i) x(i) = std::max(x(i), floor);
    for (std::size_t v : selection) x(static_cast<Eigen::Index>(v)) = std::min(x(static_cast<Eigen::Index>(v)), 0.5 * eps);
    if (const double total = x.sum(); total > 1.0 - 1e-6) x *= (1.0 - 1e-6) / total;

    double worst = 0.0;
    for (std::size_t j = 0; j < a_.size(); ++j) worst = std::max(worst, block_value(j, x));
    const double t0 = worst + std::max(0.1 * worst, 1e-10);

    State z{x, t0};
    const std::size_t constraints = 2 * a_.size() + static_cast<std::size_t>(n) + 1;
    double scale = static_cast<double>(constraints) / std::max(true_objective(z.x), 1e-8);

    Outcome out;
    out.x = z.x;
    out.objective = true_objective(z.x);
    double last_accepted = std::numeric_limits<double>::infinity();
    bool budget_left = true;
    while (true) {
      budget_left = center(z, scale, selection, out.iterations);
      const double value = true_objective(z.x);
      if (value <= last_accepted) {
        last_accepted = value;
        out.trace.push_back(value);
        out.x = z.x;
        out.objective = value;
      }
      if (static_cast<double>(constraints) / scale < options_.gap_tolerance) {
        out.converged = true;
        break;
      }
      if (!budget_left) break;
      scale *= kBarrierGrowth;
    }

    out.zero_duals.resize(selection.size());
    for (std::size_t j = 0; j < selection.size(); ++j) {
      const double slack = eps - z.x(static_cast<Eigen::Index>(selection[j]));
      out.zero_duals[j] = 1.0 / (scale * slack);
    }
    return out;
  }

 private:
  static constexpr double kBarrierGrowth = 20.0;
  static constexpr double kNewtonTolerance = 1e-6;
  static constexpr std::size_t kStageSteps = 60;

  struct State {
    VectorXd x;
    double t;
  };

  double block_value(std::size_t j, const VectorXd& x) const {
    const auto cols = a_[j].cols();
    return (a_[j] * x.head(cols) - b_[j]).squaredNorm();
  }

  double regularizer(const VectorXd& x) const {
    const double sq = x.squaredNorm();
    return prob_.regularizer == Regularizer::kSquaredNorm ? sq : std::sqrt(sq);
  }

  double true_objective(const VectorXd& x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < a_.size(); ++j) worst = std::max(worst, block_value(j, x));
    return worst + prob_.lambda * regularizer(x);
  }

  // Newton centering for scale * (t + lambda R) - sum log(slack). Returns
  // false once the iteration budget is spent.
  bool center(State& z, double scale, const std::vector<std::size_t>& selection, std::size_t& iterations) const {
    const auto n = static_cast<Eigen::Index>(prob_.dimension());
    const double eps = prob_.epsilon;
    const double lambda = prob_.lambda;
    MatrixXd h(n + 1, n + 1);
    VectorXd g(n + 1);
    std::vector<VectorXd> residual(a_.size());
    std::vector<double> slack(a_.size());

    for (std::size_t stage_steps = 0; stage_steps < kStageSteps; ++stage_steps) {
      if (iterations >= options_.max_iterations) return false;
      h.setZero();
      g.setZero();

      g(n) = scale;
      if (prob_.regularizer == Regularizer::kSquaredNorm) {
        g.head(n) += 2.0 * scale * lambda * z.x;
        h.topLeftCorner(n, n).diagonal().array() += 2.0 * scale * lambda;
      } else {
        const double norm = z.x.norm();
        g.head(n) += scale * lambda * z.x / norm;
        h.topLeftCorner(n, n) += scale * lambda *
                                 (MatrixXd::Identity(n, n) - z.x * z.x.transpose() / (norm * norm)) / norm;
      }

      for (std::size_t j = 0; j < a_.size(); ++j) {
        const auto cols = a_[j].cols();
        residual[j] = a_[j] * z.x.head(cols) - b_[j];
        slack[j] = z.t - residual[j].squaredNorm();
        const VectorXd grad_f = 2.0 * a_[j].transpose() * residual[j];
        const double s = slack[j];
        // Barrier term -log(t - f_j).
        g.head(cols) += grad_f / s;
        g(n) -= 1.0 / s;
        h.topLeftCorner(cols, cols) += grad_f * grad_f.transpose() / (s * s) + 2.0 * gram_[j] / s;
        h.block(0, n, cols, 1) -= grad_f / (s * s);
        h.block(n, 0, 1, cols) -= grad_f.transpose() / (s * s);
        h(n, n) += 1.0 / (s * s);
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        g(i) -= 1.0 / z.x(i);
        h(i, i) += 1.0 / (z.x(i) * z.x(i));
      }
      const double mass_slack = 1.0 - z.x.sum();
      g.head(n).array() += 1.0 / mass_slack;
      h.topLeftCorner(n, n).array() += 1.0 / (mass_slack * mass_slack);
      for (std::size_t v : selection) {
        const auto i = static_cast<Eigen::Index>(v);
        const double s = eps - z.x(i);
        g(i) += 1.0 / s;
        h(i, i) += 1.0 / (s * s);
      }

      // Symmetric diagonal scaling keeps the factorisation accurate when
      // barrier curvature spans many orders of magnitude.
      const VectorXd d = h.diagonal().cwiseSqrt().cwiseInverse();
      const MatrixXd hs = d.asDiagonal() * h * d.asDiagonal();
      Eigen::LLT<MatrixXd> llt(hs);
      VectorXd step;
      if (llt.info() == Eigen::Success) {
        step = d.asDiagonal() * llt.solve(-(d.asDiagonal() * g));
      } else {
        Eigen::LDLT<MatrixXd> ldlt(hs);
        step = d.asDiagonal() * ldlt.solve(-(d.asDiagonal() * g));
      }
      if (!step.allFinite()) throw Diverged("barrier Newton system became singular");

      const double decrement = -g.dot(step);
      ++iterations;
      if (decrement <= 2.0 * kNewtonTolerance) return true;

      const double alpha = line_search(z, step, g, scale, selection, residual, slack);
      if (alpha <= 0.0) return true;
      z.x += alpha * step.head(n);
      z.t += alpha * step(n);
    }
    return true;
  }

  // Backtracking on the barrier function. Differences are formed term by term
  // so that the sufficient-decrease test survives large barrier scales.
  double line_search(const State& z, const VectorXd& step, const VectorXd& g, double scale,
                     const std::vector<std::size_t>& selection, const std::vector<VectorXd>& residual,
                     const std::vector<double>& slack) const {
    const auto n = static_cast<Eigen::Index>(prob_.dimension());
    const double eps = prob_.epsilon;
    const VectorXd dx = step.head(n);
    const double dt = step(n);

    double alpha = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dx(i) < 0.0) alpha = std::min(alpha, -0.99 * z.x(i) / dx(i));
    }
    const double mass_slack = 1.0 - z.x.sum();
    const double mass_step = -dx.sum();
    if (mass_step < 0.0) alpha = std::min(alpha, -0.99 * mass_slack / mass_step);
    for (std::size_t v : selection) {
      const auto i = static_cast<Eigen::Index>(v);
      if (dx(i) > 0.0) alpha = std::min(alpha, 0.99 * (eps - z.x(i)) / dx(i));
    }

    std::vector<VectorXd> a_dx(a_.size());
    for (std::size_t j = 0; j < a_.size(); ++j) a_dx[j] = a_[j] * dx.head(a_[j].cols());

    const double slope = g.dot(step);
    for (int attempt = 0; attempt < 60; ++attempt, alpha *= 0.5) {
      double change = scale * alpha * dt;
      if (prob_.regularizer == Regularizer::kSquaredNorm) {
        change += scale * prob_.lambda * (2.0 * alpha * z.x.dot(dx) + alpha * alpha * dx.squaredNorm());
      } else {
        change += scale * prob_.lambda * ((z.x + alpha * dx).norm() - z.x.norm());
      }
      bool feasible = true;
      for (std::size_t j = 0; j < a_.size() && feasible; ++j) {
        const double delta = alpha * dt - (2.0 * alpha * residual[j].dot(a_dx[j]) + alpha * alpha * a_dx[j].squaredNorm());
        const double ratio = delta / slack[j];
        if (ratio <= -1.0) {
          feasible = false;
        } else {
          change -= std::log1p(ratio);
        }
      }
      if (!feasible) continue;
      for (Eigen::Index i = 0; i < n; ++i) change -= std::log1p(alpha * dx(i) / z.x(i));
      change -= std::log1p(alpha * mass_step / mass_slack);
      for (std::size_t v : selection) {
        const auto i = static_cast<Eigen::Index>(v);
        change -= std::log1p(-alpha * dx(i) / (eps - z.x(i)));
      }
      if (change <= 0.25 * alpha * slope) return alpha;
    }
    return 0.0;
  }

  const OptProblem& prob_;
  const SolverOptions& options_;
  std::vector<MatrixXd> a_;
  std::vector<VectorXd> b_;
  std::vector<MatrixXd> gram_;
};

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void finish_report(const OptProblem& prob, SolverReport& report) {
  report.objective = objective(prob, report.x);
  report.residuals = block_residuals(prob, report.x);
  report.max_violation = constraint_violations(prob, report.x).max();
}

}  // namespace

SolverReport solve(const OptProblem& prob, std::span<const double> x0, const SolverOptions& options) {
  check_layout(prob, x0);
  const std::size_t nodes = prob.node_count();
  std::vector<std::size_t> selection(nodes);
  for (NodeId j = 0; j < nodes; ++j) {
    const auto first = x0.begin() + static_cast<std::ptrdiff_t>(prob.node_begin[j]);
    const auto last = x0.begin() + static_cast<std::ptrdiff_t>(prob.node_begin[j + 1]);
    selection[j] = static_cast<std::size_t>(std::min_element(first, last) - x0.begin());
  }

  const BarrierSolver barrier(prob, options);
  const VectorXd start = Eigen::Map<const VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  BarrierSolver::Outcome best = barrier.run(selection, start);
  std::vector<double> trace = best.trace;
  std::size_t iterations = best.iterations;
  bool converged = best.converged;

  // Nodes whose zero constraint binds may do better with another coordinate
  // held at zero. Try alternatives, largest dual first, keeping improvements.
  std::size_t trials = 0;
  bool improved = true;
  while (improved && trials < options.max_switch_trials) {
    improved = false;
    std::vector<NodeId> order(nodes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](NodeId l, NodeId r) { return best.zero_duals[l] > best.zero_duals[r]; });
    for (NodeId j : order) {
      if (improved || trials >= options.max_switch_trials) break;
      if (best.zero_duals[j] <= 1e-9) break;
      std::vector<std::size_t> alternatives;
      for (std::size_t v = prob.node_begin[j]; v < prob.node_begin[j + 1]; ++v) {
        if (v != selection[j]) alternatives.push_back(v);
      }
      std::stable_sort(alternatives.begin(), alternatives.end(),
                       [&](std::size_t l, std::size_t r) { return best.x(static_cast<Eigen::Index>(l)) < best.x(static_cast<Eigen::Index>(r)); });
      for (std::size_t v : alternatives) {
        if (trials >= options.max_switch_trials) break;
        ++trials;
        std::vector<std::size_t> candidate = selection;
        candidate[j] = v;
        BarrierSolver::Outcome trial = barrier.run(candidate, best.x);
        iterations += trial.iterations;
        if (trial.objective < best.objective - 1e-12 * (1.0 + best.objective)) {
          for (double value : trial.trace) {
            if (value <= trace.back()) trace.push_back(value);
          }
          selection = std::move(candidate);
          converged = trial.converged;
          best = std::move(trial);
          improved = true;
          break;
        }
      }
    }
  }

  SolverReport report;
  report.x = to_std(best.x);
  report.iterations = iterations;
  report.converged = converged;
  report.zero_selection.resize(nodes);
  for (NodeId j = 0; j < nodes; ++j) report.zero_selection[j] = selection[j] - prob.node_begin[j];

  // Barrier iterates never touch the boundary; snap the interior dust.
  std::vector<double> snapped = report.x;
  for (double& v : snapped) {
    if (v < 1e-10) v = 0.0;
  }
  if (objective(prob, snapped) <= objective(prob, report.x)) report.x = std::move(snapped);

  const std::vector<double> initial(x0.begin(), x0.end());
  if (constraint_violations(prob, initial).max() <= kFeasibilityTolerance &&
      objective(prob, initial) <= objective(prob, report.x)) {
    report.x = initial;
  }
  finish_report(prob, report);
  if (trace.empty() || report.objective < trace.back()) trace.push_back(report.objective);
  report.trace = std::move(trace);

  if (report.max_violation > kFeasibilityTolerance) {
    throw Diverged("solver stopped with constraint violation " + std::to_string(report.max_violation));
  }
  return report;
}

SolverReport solve(const OptProblem& prob, const SolverOptions& options) {
  const std::vector<double> zero(prob.dimension(), 0.0);
  return solve(prob, zero, options);
}

std::vector<double> random_start(const OptProblem& prob, Rng& rng) {
  const double upper = 1.0 / static_cast<double>(prob.layout.total());
  std::vector<double> x(prob.dimension());
  for (double& v : x) v = rng.uniform(0.0, upper);
  for (NodeId j = 0; j < prob.node_count(); ++j) {
    const std::size_t width = prob.node_begin[j + 1] - prob.node_begin[j];
    x[prob.node_begin[j] + rng.index(width)] = 0.0;
  }
  return x;
}

SolverReport multi_start_solve(const OptProblem& prob, std::size_t runs, std::uint64_t seed,
                               const SolverOptions& options) {
  if (runs == 0) throw RangeError("restarts", "must be at least 1");
  std::vector<std::optional<SolverReport>> reports(runs);
  std::vector<std::string> failures(runs);
  parallel_for(runs, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    const std::vector<double> x0 = random_start(prob, rng);
    try {
      reports[r] = solve(prob, x0, options);
      reports[r]->run = r;
    } catch (const Diverged& e) {
      failures[r] = e.what();
    }
  });

  std::optional<SolverReport> best;
  for (auto& report : reports) {
    if (report && (!best || report->objective < best->objective)) best = std::move(report);
  }
  if (!best) throw Diverged("all " + std::to_string(runs) + " runs diverged: " + failures.front());
  return *best;
}

std::vector<DoTarget> threshold_support(const OptProblem& prob, std::span<const double> x, double tau) {
  check_layout(prob, x);
  std::vector<DoTarget> out;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] > tau) out.push_back(prob.variables[k]);
  }
  return out;
}

}  // namespace ivnmix
