#include "ivnmix/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <set>

#include "ivnmix/error.hpp"

namespace ivnmix {

bool Assignment::complete() const {
  return std::none_of(values_.begin(), values_.end(), [](std::int32_t v) { return v == kUnassigned; });
}

namespace {

std::size_t parent_rows(std::span<const NodeSpec> nodes, const NodeSpec& node) {
  std::size_t rows = 1;
  for (NodeId p : node.parents) rows *= nodes[p].cardinality();
  return rows;
}

}  // namespace

std::vector<NodeId> topological_order(std::span<const NodeSpec> nodes) {
  const std::size_t n = nodes.size();
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<NodeId>> children(n);
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId p : nodes[i].parents) {
      if (p >= n) throw DanglingParent("node '" + nodes[i].name + "' references missing parent");
      children[p].push_back(i);
      ++pending[i];
    }
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.push(i);
  }
  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const NodeId i = ready.top();
    ready.pop();
    order.push_back(i);
    for (NodeId c : children[i]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (order.size() != n) {
    for (NodeId i = 0; i < n; ++i) {
      if (pending[i] > 0) throw CycleDetected("directed cycle through node '" + nodes[i].name + "'");
    }
  }
  return order;
}

std::vector<NodeId> topological_order(const CausalNetwork& network) {
  return topological_order(network.nodes());
}

void validate(std::span<const NodeSpec> nodes, std::span<const Cpt> cpts) {
  std::set<std::string_view> names;
  for (const NodeSpec& node : nodes) {
    if (!names.insert(node.name).second) throw Error("duplicate node name '" + node.name + "'");
    if (node.categories.empty()) throw ArityMismatch("node '" + node.name + "' has no categories");
    std::set<std::string_view> labels(node.categories.begin(), node.categories.end());
    if (labels.size() != node.categories.size()) {
      throw ArityMismatch("node '" + node.name + "' has duplicate category labels");
    }
    std::set<NodeId> parents;
    for (NodeId p : node.parents) {
      if (p >= nodes.size()) throw DanglingParent("node '" + node.name + "' references missing parent");
      if (!parents.insert(p).second) {
        throw ArityMismatch("node '" + node.name + "' lists a parent twice");
      }
    }
  }
  if (cpts.size() != nodes.size()) {
    throw ArityMismatch("expected one CPT per node, got " + std::to_string(cpts.size()) + " for " +
                        std::to_string(nodes.size()) + " nodes");
  }
  topological_order(nodes);

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeSpec& node = nodes[i];
    const Cpt& cpt = cpts[i];
    if (cpt.cardinality != node.cardinality() ||
        cpt.table.size() != parent_rows(nodes, node) * node.cardinality()) {
      throw ArityMismatch("CPT of node '" + node.name + "' does not match its arity");
    }
    for (std::size_t r = 0; r < cpt.rows(); ++r) {
      double sum = 0.0;
      for (double p : cpt.row(r)) {
        if (!(p >= 0.0 && p <= 1.0)) throw RowSumViolation(node.name, r, p);
        sum += p;
      }
      if (std::abs(sum - 1.0) > kProbabilityTolerance) throw RowSumViolation(node.name, r, sum);
    }
  }
}

void validate(const CausalNetwork& network) { validate(network.nodes(), network.cpts()); }

CausalNetwork::CausalNetwork(std::string name, std::vector<NodeSpec> nodes, std::vector<Cpt> cpts)
    : name_(std::move(name)) {
  validate(nodes, cpts);
  const std::vector<NodeId> order = topological_order(nodes);
  std::vector<NodeId> position(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = k;

  nodes_.reserve(nodes.size());
  cpts_.reserve(cpts.size());
  for (NodeId old_id : order) {
    NodeSpec spec = std::move(nodes[old_id]);
    for (NodeId& p : spec.parents) p = position[p];
    nodes_.push_back(std::move(spec));
    cpts_.push_back(std::move(cpts[old_id]));
  }
}

std::size_t CausalNetwork::total_categories() const {
  std::size_t total = 0;
  for (const NodeSpec& node : nodes_) total += node.cardinality();
  return total;
}

std::size_t CausalNetwork::edge_count() const {
  std::size_t edges = 0;
  for (const NodeSpec& node : nodes_) edges += node.parents.size();
  return edges;
}

std::size_t CausalNetwork::max_in_degree() const {
  std::size_t degree = 0;
  for (const NodeSpec& node : nodes_) degree = std::max(degree, node.parents.size());
  return degree;
}

std::optional<NodeId> CausalNetwork::find(std::string_view name) const {
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

NodeId CausalNetwork::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw UndeclaredVariable("unknown variable '" + std::string(name) + "'");
}

CategoryIndex CausalNetwork::category_of(NodeId node, std::string_view label) const {
  const auto& cats = nodes_.at(node).categories;
  const auto it = std::find(cats.begin(), cats.end(), label);
  if (it == cats.end()) {
    throw InvalidIntervention("node '" + nodes_[node].name + "' has no category '" + std::string(label) +
                              "'");
  }
  return static_cast<CategoryIndex>(it - cats.begin());
}

std::size_t CausalNetwork::row_index(NodeId i, const Assignment& x) const {
  std::size_t row = 0;
  for (NodeId p : nodes_[i].parents) row = row * cardinality(p) + x[p];
  return row;
}

std::vector<std::vector<NodeId>> CausalNetwork::children() const {
  std::vector<std::vector<NodeId>> out(size());
  for (NodeId i = 0; i < size(); ++i) {
    for (NodeId p : nodes_[i].parents) out[p].push_back(i);
  }
  return out;
}

std::vector<bool> CausalNetwork::descendants(NodeId i) const {
  // Topological storage: a descendant always sits after its ancestor.
  std::vector<bool> mark(size(), false);
  for (NodeId j = i + 1; j < size(); ++j) {
    for (NodeId p : nodes_[j].parents) {
      if (p == i || mark[p]) {
        mark[j] = true;
        break;
      }
    }
  }
  return mark;
}

double joint_probability(const CausalNetwork& network, const Assignment& x) {
  if (x.size() != network.size() || !x.complete()) {
    throw PartialAssignment("joint probability needs a value for every node");
  }
  double p = 1.0;
  for (NodeId i = 0; i < network.size(); ++i) {
    p *= network.conditional(i, x);
    if (p == 0.0) break;
  }
  return p;
}

Assignment ancestral_sample(const CausalNetwork& network, Rng& rng) {
  Assignment x(network.size());
  for (NodeId i = 0; i < network.size(); ++i) {
    x.set(i, rng.categorical(network.cpt(i).row(network.row_index(i, x))));
  }
  return x;
}

CausalNetwork random_network(const RandomNetworkOptions& options, Rng& rng) {
  const std::size_t n = options.min_nodes + rng.index(options.max_nodes - options.min_nodes + 1);
  std::vector<NodeSpec> nodes(n);
  std::vector<Cpt> cpts(n);
  for (NodeId i = 0; i < n; ++i) {
    NodeSpec& node = nodes[i];
    node.name = "X" + std::to_string(i);
    const std::size_t k =
        options.min_categories + rng.index(options.max_categories - options.min_categories + 1);
    for (std::size_t c = 0; c < k; ++c) node.categories.push_back("c" + std::to_string(c));

    std::vector<NodeId> earlier(i);
    for (NodeId p = 0; p < i; ++p) earlier[p] = p;
    rng.shuffle(earlier);
    const std::size_t degree = rng.index(std::min(options.max_in_degree, i) + 1);
    node.parents.assign(earlier.begin(), earlier.begin() + static_cast<std::ptrdiff_t>(degree));
    std::sort(node.parents.begin(), node.parents.end());

    std::size_t rows = 1;
    for (NodeId p : node.parents) rows *= nodes[p].cardinality();
    cpts[i].cardinality = k;
    cpts[i].table.reserve(rows * k);
    for (std::size_t r = 0; r < rows; ++r) {
      for (double v : rng.dirichlet(k)) cpts[i].table.push_back(v);
    }
  }
  return CausalNetwork("random", std::move(nodes), std::move(cpts));
}

}  // namespace ivnmix
