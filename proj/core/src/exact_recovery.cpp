#include "ivnmix/exact_recovery.hpp"

#include <algorithm>
#include <cmath>

#include "ivnmix/error.hpp"

namespace ivnmix {

double NodeSystem::residual(std::span<const double> x) const {
  double total = 0.0;
  for (double xk : x) total += xk;
  double sq = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    // Row k of A x is x_k - a_k * sum(x).
    const double r = x[k] - a[k] * total - b[k];
    sq += r * r;
  }
  return std::sqrt(sq);
}

std::vector<double> SolutionLine::point(double t) const {
  std::vector<double> x(size());
  for (std::size_t k = 0; k < size(); ++k) x[k] = slopes[k] * t + intercepts[k];
  x[pivot] = t;
  return x;
}

NodeSystem build_node_system(NodeId j, const OracleBundle& bundle, std::span<const double> recovered) {
  const CategoryLayout& layout = bundle.layout();
  if (!bundle.mix) throw MissingMarginal("bundle has no mixture marginals");
  if (j >= layout.nodes()) throw MissingMarginal("node " + std::to_string(j) + " is outside the bundle");
  if (recovered.size() != layout.total()) throw LayoutMismatch("recovered proportions do not match the layout");

  NodeSystem sys;
  sys.node = j;
  for (CategoryIndex beta = 0; beta < layout.cardinality(j); ++beta) {
    if (bundle.excluded(j, beta)) continue;
    const double p = bundle.base(j, beta);
    double rhs = (*bundle.mix)(j, beta) - p;
    for (NodeId i = 0; i < j; ++i) {
      for (CategoryIndex alpha = 0; alpha < layout.cardinality(i); ++alpha) {
        const double w = recovered[layout.flat(i, alpha)];
        if (w == 0.0) continue;
        const MarginalTable& under = bundle.interventional.at(layout.flat(i, alpha));
        if (under.empty()) throw MissingMarginal("no marginals under an intervention on node " + std::to_string(i));
        rhs -= (under(j, beta) - p) * w;
      }
    }
    sys.categories.push_back(beta);
    sys.a.push_back(p);
    sys.b.push_back(rhs);
  }
  return sys;
}

SolutionLine reduce_to_line(const NodeSystem& system) {
  if (system.size() == 0) throw DegeneratePivot("node system has no retained categories");
  const auto pivot_it = std::max_element(system.a.begin(), system.a.end());
  const std::size_t pivot = static_cast<std::size_t>(pivot_it - system.a.begin());
  const double a_pivot = *pivot_it;
  if (a_pivot < kZeroMarginal) throw DegeneratePivot("pivot probability below 1e-12");

  // Rows of A sum to zero, so eliminating with the pivot row leaves K-1
  // independent equations x_k - (a_k / a_P) x_P = b_k - (a_k / a_P) b_P.
  SolutionLine line;
  line.pivot = pivot;
  line.slopes.resize(system.size());
  line.intercepts.resize(system.size());
  for (std::size_t k = 0; k < system.size(); ++k) {
    const double ratio = system.a[k] / a_pivot;
    line.slopes[k] = ratio;
    line.intercepts[k] = system.b[k] - ratio * system.b[pivot];
  }
  line.slopes[pivot] = 1.0;
  line.intercepts[pivot] = 0.0;
  return line;
}

CandidateSet candidate_points(const SolutionLine& line) {
  CandidateSet set;
  for (std::size_t k = 0; k < line.size(); ++k) {
    // x_k = slope_k t + c_k = 0 fixes the parameter t.
    const double t = (k == line.pivot) ? 0.0 : -line.intercepts[k] / line.slopes[k];
    std::vector<double> p = line.point(t);
    p[k] = 0.0;
    set.min_coordinate.push_back(*std::min_element(p.begin(), p.end()));
    set.points.push_back(std::move(p));
  }
  return set;
}

SelectedCandidate select_nonnegative(const CandidateSet& candidates, double tol) {
  std::optional<SelectedCandidate> chosen;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (candidates.min_coordinate[k] < -tol) continue;
    if (!chosen) {
      chosen = SelectedCandidate{k, candidates.points[k]};
      continue;
    }
    const auto& first = chosen->point;
    const auto& other = candidates.points[k];
    for (std::size_t c = 0; c < first.size(); ++c) {
      if (std::abs(first[c] - other[c]) > tol) {
        throw AmbiguousCandidates("candidates " + std::to_string(chosen->index) + " and " + std::to_string(k) +
                                  " are both nonnegative");
      }
    }
  }
  if (!chosen) throw NoNonnegativeCandidate("no candidate point is nonnegative");
  for (double& v : chosen->point) {
    if (v < 0.0) v = 0.0;
  }
  return *chosen;
}

bool RecoveryResult::ok() const {
  return std::all_of(nodes.begin(), nodes.end(),
                     [](const NodeRecovery& n) { return n.status == NodeStatus::kRecovered; });
}

std::optional<NodeId> RecoveryResult::failed_node() const {
  for (const NodeRecovery& n : nodes) {
    if (n.status == NodeStatus::kFailed) return n.node;
  }
  return std::nullopt;
}

RecoveryResult recover_all(const OracleBundle& bundle, double tol) {
  bundle.check_complete();
  if (!bundle.mix) throw MissingMarginal("bundle has no mixture marginals");
  const CategoryLayout& layout = bundle.layout();
  std::vector<double> x(layout.total(), 0.0);

  RecoveryResult result;
  bool failed = false;
  for (NodeId j = 0; j < layout.nodes(); ++j) {
    NodeRecovery report;
    report.node = j;
    if (failed) {
      result.nodes.push_back(report);
      continue;
    }
    try {
      const NodeSystem sys = build_node_system(j, bundle, x);
      const SelectedCandidate selected = select_nonnegative(candidate_points(reduce_to_line(sys)), tol);
      for (std::size_t k = 0; k < sys.size(); ++k) x[layout.flat(j, sys.categories[k])] = selected.point[k];
      report.status = NodeStatus::kRecovered;
      report.zero_category = sys.categories[selected.index];
      report.residual = sys.residual(selected.point);
    } catch (const Error& e) {
      report.status = NodeStatus::kFailed;
      report.message = e.what();
      failed = true;
    }
    result.nodes.push_back(std::move(report));
  }

  result.spec = MixtureSpec::from_do_weights(layout, x);
  if (result.spec.pi_phi < 0.0 && result.spec.pi_phi > -tol) result.spec.pi_phi = 0.0;
  return result;
}

const char* to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::kRecovered:
      return "recovered";
    case NodeStatus::kFailed:
      return "failed";
    case NodeStatus::kSkipped:
      return "skipped";
  }
  return "unknown";
}

}  // namespace ivnmix
