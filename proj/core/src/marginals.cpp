#include "ivnmix/marginals.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "ivnmix/error.hpp"

namespace ivnmix {

namespace {

// Table over an ordered variable list, row-major with the last variable
// varying fastest. A CPT is already a factor over (parents..., child).
struct Factor {
  std::vector<NodeId> vars;
  std::vector<std::size_t> cards;
  std::vector<double> values;
};

Factor cpt_factor(const CausalNetwork& network, NodeId i) {
  Factor f;
  for (NodeId p : network.node(i).parents) {
    f.vars.push_back(p);
    f.cards.push_back(network.cardinality(p));
  }
  f.vars.push_back(i);
  f.cards.push_back(network.cardinality(i));
  f.values = network.cpt(i).table;
  return f;
}

// Multiplies `factors` and sums `eliminated` out of the product.
Factor combine(const std::vector<const Factor*>& factors, std::optional<NodeId> eliminated) {
  std::vector<NodeId> scope;
  std::vector<std::size_t> cards;
  for (const Factor* f : factors) {
    for (std::size_t k = 0; k < f->vars.size(); ++k) {
      if (std::find(scope.begin(), scope.end(), f->vars[k]) == scope.end()) {
        scope.push_back(f->vars[k]);
        cards.push_back(f->cards[k]);
      }
    }
  }
  // Put the eliminated variable first so the output index is contiguous.
  if (eliminated) {
    const auto it = std::find(scope.begin(), scope.end(), *eliminated);
    const auto pos = it - scope.begin();
    std::rotate(scope.begin(), it, it + 1);
    std::rotate(cards.begin(), cards.begin() + pos, cards.begin() + pos + 1);
  }

  const std::size_t dims = scope.size();
  std::vector<std::vector<std::size_t>> strides(factors.size(), std::vector<std::size_t>(dims, 0));
  for (std::size_t f = 0; f < factors.size(); ++f) {
    std::size_t stride = 1;
    for (std::size_t k = factors[f]->vars.size(); k-- > 0;) {
      const auto d = std::find(scope.begin(), scope.end(), factors[f]->vars[k]) - scope.begin();
      strides[f][static_cast<std::size_t>(d)] = stride;
      stride *= factors[f]->cards[k];
    }
  }

  Factor out;
  const std::size_t first_kept = eliminated ? 1 : 0;
  out.vars.assign(scope.begin() + static_cast<std::ptrdiff_t>(first_kept), scope.end());
  out.cards.assign(cards.begin() + static_cast<std::ptrdiff_t>(first_kept), cards.end());
  std::size_t out_size = 1;
  for (std::size_t c : out.cards) out_size *= c;
  out.values.assign(out_size, 0.0);

  std::size_t total = out_size * (eliminated ? cards.front() : 1);
  std::vector<std::size_t> digit(dims, 0);
  std::vector<std::size_t> index(factors.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    double prod = 1.0;
    for (std::size_t f = 0; f < factors.size(); ++f) prod *= factors[f]->values[index[f]];
    out.values[n % out_size] += prod;

    for (std::size_t d = dims; d-- > 0;) {
      if (++digit[d] < cards[d]) {
        for (std::size_t f = 0; f < factors.size(); ++f) index[f] += strides[f][d];
        break;
      }
      digit[d] = 0;
      for (std::size_t f = 0; f < factors.size(); ++f) index[f] -= strides[f][d] * (cards[d] - 1);
    }
  }
  return out;
}

// Number of new edges that eliminating `v` adds to the interaction graph.
std::size_t fill_in(const std::vector<std::set<NodeId>>& adjacency, NodeId v) {
  const auto& nbrs = adjacency[v];
  std::size_t fill = 0;
  for (auto a = nbrs.begin(); a != nbrs.end(); ++a) {
    for (auto b = std::next(a); b != nbrs.end(); ++b) {
      if (!adjacency[*a].count(*b)) ++fill;
    }
  }
  return fill;
}

std::vector<double> query_marginal(const CausalNetwork& network, NodeId query) {
  // Non-ancestors of the query sum out to one and are dropped up front.
  std::vector<bool> relevant(network.size(), false);
  relevant[query] = true;
  for (NodeId i = query + 1; i-- > 0;) {
    if (!relevant[i]) continue;
    for (NodeId p : network.node(i).parents) relevant[p] = true;
  }

  std::vector<Factor> pool;
  std::vector<std::set<NodeId>> adjacency(network.size());
  std::set<NodeId> remaining;
  for (NodeId i = 0; i <= query; ++i) {
    if (!relevant[i]) continue;
    pool.push_back(cpt_factor(network, i));
    const auto& vars = pool.back().vars;
    for (NodeId a : vars) {
      for (NodeId b : vars) {
        if (a != b) adjacency[a].insert(b);
      }
    }
    if (i != query) remaining.insert(i);
  }

  while (!remaining.empty()) {
    NodeId best = *remaining.begin();
    std::size_t best_fill = std::numeric_limits<std::size_t>::max();
    for (NodeId v : remaining) {
      const std::size_t fill = fill_in(adjacency, v);
      if (fill < best_fill) {
        best_fill = fill;
        best = v;
      }
    }

    std::vector<const Factor*> involved;
    std::vector<Factor> kept;
    for (const Factor& f : pool) {
      if (std::find(f.vars.begin(), f.vars.end(), best) != f.vars.end()) involved.push_back(&f);
    }
    Factor reduced = combine(involved, best);
    for (Factor& f : pool) {
      if (std::find(f.vars.begin(), f.vars.end(), best) == f.vars.end()) kept.push_back(std::move(f));
    }
    kept.push_back(std::move(reduced));
    pool = std::move(kept);

    for (NodeId a : adjacency[best]) {
      adjacency[a].erase(best);
      for (NodeId b : adjacency[best]) {
        if (a != b) adjacency[a].insert(b);
      }
    }
    adjacency[best].clear();
    remaining.erase(best);
  }

  std::vector<const Factor*> rest;
  for (const Factor& f : pool) rest.push_back(&f);
  return combine(rest, std::nullopt).values;
}

}  // namespace

const MarginalTable& OracleBundle::component(const InterventionId& id) const {
  if (id.is_phi()) return base;
  return interventional.at(layout().flat(id.target().node, id.target().category));
}

std::vector<bool> OracleBundle::excluded_mask() const {
  std::vector<bool> mask(layout().total());
  for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = base.values[k] <= kZeroMarginal;
  return mask;
}

void OracleBundle::check_complete() const {
  const CategoryLayout& l = layout();
  if (base.values.size() != l.total()) throw MissingMarginal("base table does not match the layout");
  if (interventional.size() != l.total()) {
    throw MissingMarginal("expected " + std::to_string(l.total()) + " interventional tables, got " +
                          std::to_string(interventional.size()));
  }
  for (std::size_t k = 0; k < interventional.size(); ++k) {
    if (interventional[k].layout != l || interventional[k].values.size() != l.total()) {
      const DoTarget t = l.unflatten(k);
      throw MissingMarginal("interventional table for node " + std::to_string(t.node) + " category " +
                            std::to_string(t.category) + " is missing");
    }
  }
  if (mix && (mix->layout != l || mix->values.size() != l.total())) {
    throw MissingMarginal("mixture table does not match the layout");
  }
}

MarginalTable exact_marginals(const CausalNetwork& network) {
  MarginalTable table{CategoryLayout(network)};
  for (NodeId j = 0; j < network.size(); ++j) {
    const std::vector<double> m = query_marginal(network, j);
    std::copy(m.begin(), m.end(), table.values.begin() + static_cast<std::ptrdiff_t>(table.layout.offset(j)));
  }
  return table;
}

std::vector<MarginalTable> interventional_marginals(const CausalNetwork& network) {
  std::vector<MarginalTable> out;
  out.reserve(network.total_categories());
  for (NodeId i = 0; i < network.size(); ++i) {
    for (CategoryIndex a = 0; a < network.cardinality(i); ++a) {
      out.push_back(exact_marginals(surgery(network, InterventionId::make_do(i, a))));
    }
  }
  return out;
}

MarginalTable empirical_marginals(std::span<const Assignment> samples, const CategoryLayout& layout) {
  if (samples.empty()) throw EmptySampleSet("cannot estimate marginals from zero samples");
  std::vector<std::size_t> counts(layout.total(), 0);
  for (const Assignment& x : samples) {
    for (NodeId j = 0; j < layout.nodes(); ++j) ++counts[layout.flat(j, x[j])];
  }
  MarginalTable table{layout};
  const double m = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < counts.size(); ++k) table.values[k] = static_cast<double>(counts[k]) / m;
  return table;
}

MarginalTable mixture_marginals_exact(const MarginalTable& base,
                                      std::span<const MarginalTable> interventional,
                                      const MixtureSpec& spec) {
  MarginalTable mix{base.layout};
  for (std::size_t k = 0; k < base.values.size(); ++k) mix.values[k] = spec.pi_phi * base.values[k];
  for (const auto& [target, weight] : spec.pi) {
    if (weight == 0.0) continue;
    if (target.node >= base.layout.nodes() || target.category >= base.layout.cardinality(target.node)) {
      throw MissingComponent("mixture weights a component outside the bundle layout");
    }
    const std::size_t flat = base.layout.flat(target.node, target.category);
    if (flat >= interventional.size() || interventional[flat].values.size() != base.values.size()) {
      throw MissingComponent("no marginals for weighted component at node " + std::to_string(target.node));
    }
    const auto& table = interventional[flat].values;
    for (std::size_t k = 0; k < mix.values.size(); ++k) mix.values[k] += weight * table[k];
  }
  return mix;
}

MarginalTable mixture_marginals_exact(const OracleBundle& bundle, const MixtureSpec& spec) {
  return mixture_marginals_exact(bundle.base, bundle.interventional, spec);
}

OracleBundle build_oracle_bundle(const CausalNetwork& network) {
  OracleBundle bundle;
  bundle.nodes.assign(network.nodes().begin(), network.nodes().end());
  bundle.base = exact_marginals(network);
  bundle.interventional = interventional_marginals(network);
  return bundle;
}

}  // namespace ivnmix
