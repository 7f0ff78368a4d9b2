#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ivnmix/network.hpp"

namespace ivnmix {

/// Target of a perfect intervention do(X_node = category).
struct DoTarget {
  NodeId node = 0;
  CategoryIndex category = 0;
  auto operator<=>(const DoTarget&) const = default;
};

/// Mixture component label: either no intervention (phi) or one Do target.
class InterventionId {
 public:
  static InterventionId phi() { return InterventionId(); }
  static InterventionId make_do(NodeId node, CategoryIndex category) {
    return InterventionId(DoTarget{node, category});
  }

  bool is_phi() const { return !target_.has_value(); }
  const DoTarget& target() const { return *target_; }

  auto operator<=>(const InterventionId&) const = default;

 private:
  InterventionId() = default;
  explicit InterventionId(DoTarget t) : target_(t) {}
  std::optional<DoTarget> target_;
};

/// Flat indexing of every (node, category) pair in node-major, category-minor
/// order. Shared by marginal tables, Do components and solver layouts.
class CategoryLayout {
 public:
  CategoryLayout() = default;
  explicit CategoryLayout(std::vector<std::size_t> cardinalities);
  explicit CategoryLayout(const CausalNetwork& network);

  std::size_t nodes() const { return cardinalities_.size(); }
  std::size_t total() const { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t cardinality(NodeId i) const { return cardinalities_[i]; }
  std::size_t offset(NodeId i) const { return offsets_[i]; }
  std::size_t flat(NodeId i, CategoryIndex c) const { return offsets_[i] + c; }
  DoTarget unflatten(std::size_t flat) const;

  bool operator==(const CategoryLayout&) const = default;

 private:
  std::vector<std::size_t> cardinalities_;
  std::vector<std::size_t> offsets_;  // nodes() + 1 entries
};

/// Canonical component order: phi first, then Do(i, a) node-major /
/// category-minor. Index 0 is phi; Do(i, a) sits at 1 + layout.flat(i, a).
std::vector<InterventionId> enumerate_components(const CausalNetwork& network);

std::size_t component_index(const CategoryLayout& layout, const InterventionId& id);
InterventionId component_at(const CategoryLayout& layout, std::size_t index);

/// Throws InvalidIntervention unless `id` names an existing node/category.
void check_intervention(const CausalNetwork& network, const InterventionId& id);

/// Graph surgery: node i loses its parents and its CPT becomes a point mass on
/// the forced category. Every other CPT is left untouched.
CausalNetwork surgery(const CausalNetwork& network, const InterventionId& id);

/// surgery() for every component, in canonical order.
std::vector<CausalNetwork> component_networks(const CausalNetwork& network);

}  // namespace ivnmix
