#pragma once

// Deviations-in-marginals estimator for noisy mixture marginals.
//
// For every node j, the Do proportions of nodes up to j satisfy A_j x_j = b_j
// with A_j[b][(i,a)] = p_{i,a}(j,b) - p(j,b) and b_j[b] = p_mix(j,b) - p(j,b).
// With estimated mixture marginals the estimator solves
//
//   minimize   max_j ||A_j x_j - b_j||^2 + lambda R(x)
//   subject to x >= 0,  sum(x) <= 1,  min_k x_{j,k} <= epsilon for every j,
//
// where R(x) = ||x||^2 by default. The per-node constraint is the relaxed form
// of "some category of node j has zero proportion".

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ivnmix/marginals.hpp"
#include "ivnmix/mixture.hpp"

namespace ivnmix {

inline constexpr double kDefaultLambda = 0.1;
inline constexpr double kDefaultEpsilon = 1e-5;
inline constexpr std::size_t kDefaultRestarts = 60;
inline constexpr double kDefaultSupportThreshold = 0.001;
inline constexpr double kFeasibilityTolerance = 1e-6;

enum class Regularizer {
  kSquaredNorm,  // lambda * sum x^2
  kNorm,         // lambda * sqrt(sum x^2)
};

/// Rows of one node's system over every variable of nodes up to that node.
struct OptBlock {
  NodeId node = 0;
  std::vector<CategoryIndex> rows;  // retained categories of the node
  std::size_t columns = 0;          // variables [0, columns) participate
  std::vector<double> matrix;       // rows x columns, row-major
  std::vector<double> rhs;

  double at(std::size_t r, std::size_t c) const { return matrix[r * columns + c]; }
};

struct OptProblem {
  CategoryLayout layout;           // full category layout of the network
  std::vector<DoTarget> variables; // retained (i, a) pairs in canonical order
  std::vector<std::size_t> node_begin;  // variables of node j: [node_begin[j], node_begin[j+1])
  std::vector<OptBlock> blocks;
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEpsilon;
  Regularizer regularizer = Regularizer::kSquaredNorm;

  std::size_t dimension() const { return variables.size(); }
  std::size_t node_count() const { return blocks.size(); }
  /// Solver vector -> Do proportions indexed by flat (i, a).
  std::vector<double> to_flat(std::span<const double> x) const;
  /// Flat Do proportions -> solver vector (excluded categories dropped).
  std::vector<double> from_flat(std::span<const double> flat) const;
  std::vector<double> from_spec(const MixtureSpec& spec) const;
  MixtureSpec to_spec(std::span<const double> x) const;
};

/// Throws MissingMarginal or RangeError (lambda outside [0, 1], epsilon <= 0).
OptProblem build_opt_problem(const OracleBundle& bundle, double lambda = kDefaultLambda,
                             double epsilon = kDefaultEpsilon,
                             Regularizer regularizer = Regularizer::kSquaredNorm);

/// f_j(x) = ||A_j x_j - b_j||^2 for every node.
std::vector<double> block_residuals(const OptProblem& prob, std::span<const double> x);

/// max_j f_j(x) + lambda R(x). Throws LayoutMismatch.
double objective(const OptProblem& prob, std::span<const double> x);

/// Gradient of the block attaining the max (lowest index on ties) plus the
/// regularizer gradient.
std::vector<double> objective_gradient(const OptProblem& prob, std::span<const double> x);

struct ConstraintViolations {
  std::vector<double> nonnegativity;  // min(0, x_i)
  double mass = 0.0;                  // max(0, sum x - 1)
  std::vector<double> relaxed_zero;   // max(0, min_k x_{j,k} - epsilon)

  double max() const;
};

ConstraintViolations constraint_violations(const OptProblem& prob, std::span<const double> x);

struct SolverOptions {
  /// Newton steps allowed per convex subproblem.
  std::size_t max_iterations = 500;
  /// Barrier duality-gap target.
  double gap_tolerance = 1e-11;
  /// Subproblems tried while re-selecting the zero coordinate of each node.
  std::size_t max_switch_trials = 64;
};

struct SolverReport {
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> residuals;
  double max_violation = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Objective after every accepted barrier stage; non-increasing.
  std::vector<double> trace;
  /// Per node, the local index of the coordinate held below epsilon.
  std::vector<std::size_t> zero_selection;
  std::size_t run = 0;
};

/// Local solve from `x0`. Each node starts with its smallest coordinate of
/// `x0` as the zero coordinate; the convex subproblem for that choice is
/// solved by a log-barrier method on the epigraph form (t >= f_j(x)), then
/// nodes whose zero constraint binds try their other coordinates. Throws
/// Diverged when the budget runs out with a violated constraint.
SolverReport solve(const OptProblem& prob, std::span<const double> x0, const SolverOptions& options = {});
SolverReport solve(const OptProblem& prob, const SolverOptions& options = {});

/// Random feasible start: coordinates uniform in [0, 1/total categories], one
/// random coordinate per node set to zero.
std::vector<double> random_start(const OptProblem& prob, Rng& rng);

/// Best-of-`runs` solve; run r starts from random_start with
/// Rng(derive_seed(seed, r)). Ties go to the lower run index.
SolverReport multi_start_solve(const OptProblem& prob, std::size_t runs, std::uint64_t seed,
                               const SolverOptions& options = {});

/// Do targets whose estimate exceeds `tau`.
std::vector<DoTarget> threshold_support(const OptProblem& prob, std::span<const double> x,
                                        double tau = kDefaultSupportThreshold);

}  // namespace ivnmix
