#include "pgmsc/inference.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "pgmsc/error.hpp"

namespace pgmsc {

namespace {

std::vector<std::size_t> strides_of(const std::vector<int>& cards) {
  std::vector<std::size_t> strides(cards.size());
  std::size_t s = 1;
  for (std::size_t i = cards.size(); i-- > 0;) {
    strides[i] = s;
    s *= static_cast<std::size_t>(cards[i]);
  }
  return strides;
}

// Stride of each variable of `scope` inside factor `f` (0 when absent).
std::vector<std::size_t> strides_in(const std::vector<int>& scope, const Factor& f) {
  const auto fs = strides_of(f.cards);
  std::vector<std::size_t> out(scope.size(), 0);
  for (std::size_t i = 0; i < scope.size(); ++i) {
    auto it = std::lower_bound(f.scope.begin(), f.scope.end(), scope[i]);
    if (it != f.scope.end() && *it == scope[i]) out[i] = fs[it - f.scope.begin()];
  }
  return out;
}

void validate_query(const BayesianNetwork& bn, const Evidence& evidence, int query) {
  const int n = bn.num_nodes();
  if (query < 0 || query >= n) {
    throw Error(Errc::invalid_argument, "query node " + std::to_string(query) + " out of range");
  }
  for (const auto& [node, state] : evidence) {
    if (node < 0 || node >= n) {
      throw Error(Errc::invalid_argument, "evidence node " + std::to_string(node) + " out of range");
    }
    if (state < 0 || state >= bn.cardinality(node)) {
      throw Error(Errc::invalid_argument, "evidence state out of range for node " + std::to_string(node));
    }
  }
  if (evidence.count(query)) {
    throw Error(Errc::invalid_argument, "query node " + std::to_string(query) + " is observed");
  }
}

std::vector<double> normalized(std::vector<double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error(Errc::zero_evidence, "evidence has zero probability");
  for (double& w : weights) w /= total;
  return weights;
}

Factor cpd_factor(const BayesianNetwork& bn, int node) {
  const auto& cpd = bn.cpd(node);
  Factor f;
  f.scope = cpd.parents;
  f.scope.insert(std::lower_bound(f.scope.begin(), f.scope.end(), node), node);
  for (int v : f.scope) f.cards.push_back(bn.cardinality(v));
  std::size_t total = 1;
  for (int c : f.cards) total *= static_cast<std::size_t>(c);
  f.values.resize(total);

  std::vector<int> states(bn.num_nodes(), 0);
  std::vector<int> digit(f.scope.size(), 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    for (std::size_t i = 0; i < f.scope.size(); ++i) states[f.scope[i]] = digit[i];
    f.values[idx] = cpd.prob(cpd.row_of(states), states[node]);
    for (std::size_t i = f.scope.size(); i-- > 0;) {
      if (++digit[i] < f.cards[i]) break;
      digit[i] = 0;
    }
  }
  return f;
}

}  // namespace

Factor factor_product(const Factor& a, const Factor& b) {
  Factor out;
  std::set_union(a.scope.begin(), a.scope.end(), b.scope.begin(), b.scope.end(),
                 std::back_inserter(out.scope));
  std::size_t total = 1;
  for (int v : out.scope) {
    auto ia = std::lower_bound(a.scope.begin(), a.scope.end(), v);
    const int card = (ia != a.scope.end() && *ia == v)
                         ? a.cards[ia - a.scope.begin()]
                         : b.cards[std::lower_bound(b.scope.begin(), b.scope.end(), v) - b.scope.begin()];
    out.cards.push_back(card);
    total *= static_cast<std::size_t>(card);
  }
  const auto sa = strides_in(out.scope, a);
  const auto sb = strides_in(out.scope, b);
  out.values.resize(total);
  std::vector<int> digit(out.scope.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    out.values[idx] = a.values[ia] * b.values[ib];
    for (std::size_t i = out.scope.size(); i-- > 0;) {
      if (++digit[i] < out.cards[i]) {
        ia += sa[i];
        ib += sb[i];
        break;
      }
      digit[i] = 0;
      ia -= sa[i] * static_cast<std::size_t>(out.cards[i] - 1);
      ib -= sb[i] * static_cast<std::size_t>(out.cards[i] - 1);
    }
  }
  return out;
}

Factor factor_sum_out(const Factor& f, int node) {
  auto it = std::lower_bound(f.scope.begin(), f.scope.end(), node);
  if (it == f.scope.end() || *it != node) return f;
  const std::size_t pos = it - f.scope.begin();
  Factor out;
  out.scope = f.scope;
  out.cards = f.cards;
  out.scope.erase(out.scope.begin() + pos);
  out.cards.erase(out.cards.begin() + pos);
  std::size_t total = 1;
  for (int c : out.cards) total *= static_cast<std::size_t>(c);
  out.values.assign(total, 0.0);

  const auto fs = strides_of(f.cards);
  const std::size_t inner = fs[pos];
  const std::size_t card = static_cast<std::size_t>(f.cards[pos]);
  const std::size_t outer = f.values.size() / (inner * card);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < card; ++k)
      for (std::size_t i = 0; i < inner; ++i)
        out.values[o * inner + i] += f.values[(o * card + k) * inner + i];
  return out;
}

Factor factor_reduce(const Factor& f, const Evidence& evidence) {
  Factor out;
  std::vector<std::size_t> fixed_offset;
  const auto fs = strides_of(f.cards);
  std::size_t base = 0;
  std::vector<std::size_t> keep_strides;
  for (std::size_t i = 0; i < f.scope.size(); ++i) {
    auto e = evidence.find(f.scope[i]);
    if (e != evidence.end()) {
      base += fs[i] * static_cast<std::size_t>(e->second);
    } else {
      out.scope.push_back(f.scope[i]);
      out.cards.push_back(f.cards[i]);
      keep_strides.push_back(fs[i]);
    }
  }
  std::size_t total = 1;
  for (int c : out.cards) total *= static_cast<std::size_t>(c);
  out.values.resize(total);
  std::vector<int> digit(out.scope.size(), 0);
  std::size_t src = base;
  for (std::size_t idx = 0; idx < total; ++idx) {
    out.values[idx] = f.values[src];
    for (std::size_t i = out.scope.size(); i-- > 0;) {
      if (++digit[i] < out.cards[i]) {
        src += keep_strides[i];
        break;
      }
      digit[i] = 0;
      src -= keep_strides[i] * static_cast<std::size_t>(out.cards[i] - 1);
    }
  }
  return out;
}

std::vector<double> posterior_enumerate(const BayesianNetwork& bn, const Evidence& evidence,
                                        int query) {
  validate_query(bn, evidence, query);
  const int n = bn.num_nodes();
  std::vector<int> free_nodes;
  std::vector<int> states(n, 0);
  for (int v = 0; v < n; ++v) {
    auto e = evidence.find(v);
    if (e != evidence.end()) {
      states[v] = e->second;
    } else {
      free_nodes.push_back(v);
    }
  }
  std::vector<double> weights(bn.cardinality(query), 0.0);
  while (true) {
    double p = 1.0;
    for (const auto& cpd : bn.cpds()) {
      p *= cpd.prob(cpd.row_of(states), states[cpd.node]);
      if (p == 0.0) break;
    }
    weights[states[query]] += p;
    std::size_t i = free_nodes.size();
    while (i-- > 0) {
      if (++states[free_nodes[i]] < bn.cardinality(free_nodes[i])) break;
      states[free_nodes[i]] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return normalized(std::move(weights));
}

std::vector<double> posterior_ve(const BayesianNetwork& bn, const Evidence& evidence, int query) {
  validate_query(bn, evidence, query);
  const int n = bn.num_nodes();

  // Nodes that are neither ancestors of the query nor of the evidence sum
  // out to one and are dropped up front.
  std::vector<char> relevant(n, 0);
  std::vector<int> stack{query};
  for (const auto& [node, state] : evidence) stack.push_back(node);
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (relevant[v]) continue;
    relevant[v] = 1;
    for (int p : bn.dag().parents(v)) stack.push_back(p);
  }

  std::vector<Factor> factors;
  std::vector<int> hidden;
  for (int v = 0; v < n; ++v) {
    if (!relevant[v]) continue;
    factors.push_back(factor_reduce(cpd_factor(bn, v), evidence));
    if (v != query && !evidence.count(v)) hidden.push_back(v);
  }

  auto contains = [](const Factor& f, int v) {
    return std::binary_search(f.scope.begin(), f.scope.end(), v);
  };

  while (!hidden.empty()) {
    // Minimum-degree choice on the current interaction graph.
    std::size_t best_pos = 0;
    std::size_t best_degree = static_cast<std::size_t>(-1);
    for (std::size_t h = 0; h < hidden.size(); ++h) {
      std::vector<int> neighbours;
      for (const auto& f : factors) {
        if (!contains(f, hidden[h])) continue;
        neighbours.insert(neighbours.end(), f.scope.begin(), f.scope.end());
      }
      std::sort(neighbours.begin(), neighbours.end());
      neighbours.erase(std::unique(neighbours.begin(), neighbours.end()), neighbours.end());
      const std::size_t degree = neighbours.empty() ? 0 : neighbours.size() - 1;
      if (degree < best_degree) {
        best_degree = degree;
        best_pos = h;
      }
    }
    const int var = hidden[best_pos];
    hidden.erase(hidden.begin() + best_pos);

    Factor merged;
    merged.values = {1.0};
    std::vector<Factor> rest;
    for (auto& f : factors) {
      if (contains(f, var)) {
        merged = factor_product(merged, f);
      } else {
        rest.push_back(std::move(f));
      }
    }
    rest.push_back(factor_sum_out(merged, var));
    factors = std::move(rest);
  }

  Factor result;
  result.values = {1.0};
  for (const auto& f : factors) result = factor_product(result, f);
  // Only the query can remain in scope.
  if (result.scope.size() != 1 || result.scope[0] != query) {
    throw Error(Errc::invalid_argument, "variable elimination left an unexpected scope");
  }
  return normalized(std::move(result.values));
}

int argmax_with_ties(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best] + kTieTolerance) best = static_cast<int>(i);
  return best;
}

MapResult map_state(const BayesianNetwork& bn, const Evidence& evidence, int node) {
  const auto posterior = posterior_ve(bn, evidence, node);
  const int s = argmax_with_ties(posterior);
  return {s, posterior[s]};
}

double prob_of_state(const BayesianNetwork& bn, const Evidence& evidence, int node, int state) {
  if (node >= 0 && node < bn.num_nodes() && (state < 0 || state >= bn.cardinality(node))) {
    throw Error(Errc::invalid_argument, "state out of range for node " + std::to_string(node));
  }
  return posterior_ve(bn, evidence, node)[state];
}

}  // namespace pgmsc
