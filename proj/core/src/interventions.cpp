#include "ivnmix/interventions.hpp"

#include <algorithm>

#include "ivnmix/error.hpp"

namespace ivnmix {

CategoryLayout::CategoryLayout(std::vector<std::size_t> cardinalities)
    : cardinalities_(std::move(cardinalities)) {
  offsets_.reserve(cardinalities_.size() + 1);
  offsets_.push_back(0);
  for (std::size_t k : cardinalities_) offsets_.push_back(offsets_.back() + k);
}

CategoryLayout::CategoryLayout(const CausalNetwork& network)
    : CategoryLayout([&] {
        std::vector<std::size_t> cards(network.size());
        for (NodeId i = 0; i < network.size(); ++i) cards[i] = network.cardinality(i);
        return cards;
      }()) {}

DoTarget CategoryLayout::unflatten(std::size_t flat) const {
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  const auto node = static_cast<NodeId>(it - offsets_.begin() - 1);
  return {node, flat - offsets_[node]};
}

std::vector<InterventionId> enumerate_components(const CausalNetwork& network) {
  std::vector<InterventionId> out;
  out.reserve(network.total_categories() + 1);
  out.push_back(InterventionId::phi());
  for (NodeId i = 0; i < network.size(); ++i) {
    for (CategoryIndex a = 0; a < network.cardinality(i); ++a) {
      out.push_back(InterventionId::make_do(i, a));
    }
  }
  return out;
}

std::size_t component_index(const CategoryLayout& layout, const InterventionId& id) {
  if (id.is_phi()) return 0;
  return 1 + layout.flat(id.target().node, id.target().category);
}

InterventionId component_at(const CategoryLayout& layout, std::size_t index) {
  if (index == 0) return InterventionId::phi();
  const DoTarget t = layout.unflatten(index - 1);
  return InterventionId::make_do(t.node, t.category);
}

void check_intervention(const CausalNetwork& network, const InterventionId& id) {
  if (id.is_phi()) return;
  const DoTarget& t = id.target();
  if (t.node >= network.size() || t.category >= network.cardinality(t.node)) {
    throw InvalidIntervention("intervention targets a node or category outside the network");
  }
}

CausalNetwork surgery(const CausalNetwork& network, const InterventionId& id) {
  check_intervention(network, id);
  if (id.is_phi()) return network;

  const DoTarget& t = id.target();
  std::vector<NodeSpec> nodes(network.nodes().begin(), network.nodes().end());
  std::vector<Cpt> cpts(network.cpts().begin(), network.cpts().end());
  nodes[t.node].parents.clear();
  Cpt& forced = cpts[t.node];
  forced.table.assign(forced.cardinality, 0.0);
  forced.table[t.category] = 1.0;
  // Removing in-edges keeps the stored order topological, so ids are stable.
  return CausalNetwork(network.name(), std::move(nodes), std::move(cpts));
}

std::vector<CausalNetwork> component_networks(const CausalNetwork& network) {
  std::vector<CausalNetwork> out;
  for (const InterventionId& id : enumerate_components(network)) out.push_back(surgery(network, id));
  return out;
}

}  // namespace ivnmix
