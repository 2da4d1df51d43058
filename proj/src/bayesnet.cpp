#include "pgmsc/bayesnet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <string>

#include "pgmsc/error.hpp"
#include "pgmsc/random.hpp"

namespace pgmsc {

// ---------------------------------------------------------------------------
// Graph

std::vector<int> topological_order(int num_nodes, std::span<const Edge> edges) {
  std::vector<std::vector<int>> children(num_nodes), parents(num_nodes);
  std::vector<int> indegree(num_nodes, 0);
  for (const auto& e : edges) {
    if (e.parent < 0 || e.parent >= num_nodes || e.child < 0 || e.child >= num_nodes) {
      throw Error(Errc::invalid_argument, "edge references a node outside the graph");
    }
    children[e.parent].push_back(e.child);
    parents[e.child].push_back(e.parent);
    ++indegree[e.child];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int v = 0; v < num_nodes; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::vector<int> order;
  order.reserve(num_nodes);
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int c : children[v])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (static_cast<int>(order.size()) == num_nodes) return order;

  // Every leftover node still has a leftover parent; walk parents until a
  // node repeats to extract one cycle.
  std::vector<int> pos(num_nodes, -1);
  std::vector<int> walk;
  int v = 0;
  while (indegree[v] == 0) ++v;
  while (pos[v] < 0) {
    pos[v] = static_cast<int>(walk.size());
    walk.push_back(v);
    for (int p : parents[v]) {
      if (indegree[p] > 0) {
        v = p;
        break;
      }
    }
  }
  std::vector<int> cycle(walk.begin() + pos[v], walk.end());
  std::reverse(cycle.begin(), cycle.end());
  std::string msg = "graph has a cycle:";
  for (int c : cycle) msg += " " + std::to_string(c) + " ->";
  msg += " " + std::to_string(cycle.front());
  throw Error(Errc::cycle, msg);
}

Dag::Dag(int num_nodes) {
  if (num_nodes < 0) throw Error(Errc::invalid_argument, "negative node count");
  parents_.resize(num_nodes);
}

Dag::Dag(int num_nodes, std::span<const Edge> edges) : Dag(num_nodes) {
  for (const auto& e : edges) {
    check_node(e.parent);
    check_node(e.child);
    if (e.parent == e.child) throw Error(Errc::cycle, "self-loop on node " + std::to_string(e.child));
    if (has_edge(e.parent, e.child)) {
      throw Error(Errc::invalid_argument, "duplicate edge " + std::to_string(e.parent) + "->" +
                                              std::to_string(e.child));
    }
    auto& pa = parents_[e.child];
    pa.insert(std::lower_bound(pa.begin(), pa.end(), e.parent), e.parent);
  }
  topological_order(num_nodes, edges);
}

void Dag::check_node(int node) const {
  if (node < 0 || node >= num_nodes()) {
    throw Error(Errc::invalid_argument, "node " + std::to_string(node) + " out of range");
  }
}

std::vector<int> Dag::children(int node) const {
  std::vector<int> out;
  for (int c = 0; c < num_nodes(); ++c)
    if (has_edge(node, c)) out.push_back(c);
  return out;
}

bool Dag::has_edge(int parent, int child) const {
  const auto& pa = parents_.at(child);
  return std::binary_search(pa.begin(), pa.end(), parent);
}

std::vector<Edge> Dag::edges() const {
  std::vector<Edge> out;
  for (int c = 0; c < num_nodes(); ++c)
    for (int p : parents_[c]) out.push_back({p, c});
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t Dag::num_edges() const {
  std::size_t n = 0;
  for (const auto& pa : parents_) n += pa.size();
  return n;
}

bool Dag::reachable(int from, int to) const {
  // Search backwards from `to` along parent links.
  std::vector<char> seen(num_nodes(), 0);
  std::vector<int> stack{to};
  seen[to] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (v == from) return true;
    for (int p : parents_[v]) {
      if (!seen[p]) {
        seen[p] = 1;
        stack.push_back(p);
      }
    }
  }
  return false;
}

void Dag::add_edge(int parent, int child) {
  check_node(parent);
  check_node(child);
  if (parent == child) throw Error(Errc::cycle, "self-loop on node " + std::to_string(child));
  if (has_edge(parent, child)) throw Error(Errc::invalid_argument, "edge already present");
  if (reachable(child, parent)) {
    throw Error(Errc::cycle, "edge " + std::to_string(parent) + "->" + std::to_string(child) +
                                 " would close a cycle");
  }
  auto& pa = parents_[child];
  pa.insert(std::lower_bound(pa.begin(), pa.end(), parent), parent);
}

void Dag::remove_edge(int parent, int child) {
  check_node(parent);
  check_node(child);
  auto& pa = parents_[child];
  auto it = std::lower_bound(pa.begin(), pa.end(), parent);
  if (it == pa.end() || *it != parent) throw Error(Errc::invalid_argument, "edge not present");
  pa.erase(it);
}

void Dag::reverse_edge(int parent, int child) {
  remove_edge(parent, child);
  try {
    add_edge(child, parent);
  } catch (...) {
    auto& pa = parents_[child];
    pa.insert(std::lower_bound(pa.begin(), pa.end(), parent), parent);
    throw;
  }
}

std::vector<int> topological_order(const Dag& dag) {
  const auto edges = dag.edges();
  return topological_order(dag.num_nodes(), edges);
}

// ---------------------------------------------------------------------------
// Network

int Cpd::num_rows() const {
  int rows = 1;
  for (int c : parent_cards) rows *= c;
  return rows;
}

int Cpd::row_of(std::span<const int> states) const {
  int r = 0;
  for (std::size_t i = 0; i < parents.size(); ++i) r = r * parent_cards[i] + states[parents[i]];
  return r;
}

BayesianNetwork::BayesianNetwork(Dag dag, std::vector<int> cardinalities, std::vector<Cpd> cpds)
    : dag_(std::move(dag)), cards_(std::move(cardinalities)), cpds_(std::move(cpds)) {
  const int n = dag_.num_nodes();
  if (static_cast<int>(cards_.size()) != n || static_cast<int>(cpds_.size()) != n) {
    throw Error(Errc::invalid_argument, "network needs one cardinality and one CPD per node");
  }
  for (int v = 0; v < n; ++v) {
    const auto& cpd = cpds_[v];
    const std::string where = "CPD of node " + std::to_string(v);
    if (cards_[v] < 1) throw Error(Errc::invalid_argument, "node cardinality must be >= 1");
    if (cpd.node != v || cpd.parents != dag_.parents(v) || cpd.card != cards_[v] ||
        cpd.parent_cards.size() != cpd.parents.size()) {
      throw Error(Errc::invalid_argument, where + " is inconsistent with the graph");
    }
    for (std::size_t i = 0; i < cpd.parents.size(); ++i) {
      if (cpd.parent_cards[i] != cards_[cpd.parents[i]]) {
        throw Error(Errc::invalid_argument, where + " has wrong parent cardinality");
      }
    }
    if (cpd.table.size() != static_cast<std::size_t>(cpd.num_rows()) * cpd.card) {
      throw Error(Errc::invalid_argument, where + " has wrong table size");
    }
    for (int r = 0; r < cpd.num_rows(); ++r) {
      double sum = 0.0;
      for (double p : cpd.row(r)) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, where + " entry outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(Errc::invalid_argument, where + " row " + std::to_string(r) + " sums to " +
                                                std::to_string(sum));
      }
    }
  }
}

double BayesianNetwork::log_joint(std::span<const int> states) const {
  double lp = 0.0;
  for (const auto& cpd : cpds_) lp += std::log(cpd.prob(cpd.row_of(states), states[cpd.node]));
  return lp;
}

StateMatrix::StateMatrix(std::span<const QuantizedLatent> rows, std::span<const int> cardinalities)
    : num_rows_(rows.size()), cards_(cardinalities.begin(), cardinalities.end()) {
  cols_.assign(cards_.size(), std::vector<int>(num_rows_));
  for (std::size_t i = 0; i < num_rows_; ++i) {
    validate_states(rows[i], cardinalities);
    for (std::size_t c = 0; c < cards_.size(); ++c) cols_[c][i] = rows[i].states[c];
  }
}

namespace {

// Joint counts of (parent configuration, node state), row-major as in Cpd.
std::vector<double> count_table(int node, std::span<const int> parents, const StateMatrix& data) {
  const auto& cards = data.cardinalities();
  std::size_t rows = 1;
  for (int p : parents) rows *= cards[p];
  const int k = cards[node];
  std::vector<double> counts(rows * k, 0.0);
  std::vector<std::size_t> config(data.num_rows(), 0);
  for (int p : parents) {
    const auto& col = data.column(p);
    const std::size_t cp = cards[p];
    for (std::size_t i = 0; i < config.size(); ++i) config[i] = config[i] * cp + col[i];
  }
  const auto& col = data.column(node);
  for (std::size_t i = 0; i < config.size(); ++i) counts[config[i] * k + col[i]] += 1.0;
  return counts;
}

std::vector<int> sorted_unique(std::span<const int> nodes) {
  std::vector<int> out(nodes.begin(), nodes.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

BayesianNetwork mle_fit(const Dag& dag, std::span<const QuantizedLatent> rows,
                        std::span<const int> cardinalities, double alpha) {
  if (rows.empty()) throw Error(Errc::empty_dataset, "mle_fit needs at least one row");
  if (!(alpha >= 0.0)) throw Error(Errc::invalid_argument, "alpha must be nonnegative");
  if (static_cast<int>(cardinalities.size()) != dag.num_nodes()) {
    throw Error(Errc::invalid_argument, "cardinality count does not match graph");
  }
  const StateMatrix data(rows, cardinalities);
  std::vector<Cpd> cpds;
  cpds.reserve(dag.num_nodes());
  for (int v = 0; v < dag.num_nodes(); ++v) {
    Cpd cpd;
    cpd.node = v;
    cpd.parents = dag.parents(v);
    for (int p : cpd.parents) cpd.parent_cards.push_back(cardinalities[p]);
    cpd.card = cardinalities[v];
    cpd.table = count_table(v, cpd.parents, data);
    for (int r = 0; r < cpd.num_rows(); ++r) {
      double* row = cpd.table.data() + static_cast<std::size_t>(r) * cpd.card;
      const double total = std::accumulate(row, row + cpd.card, 0.0);
      const double denom = total + alpha * cpd.card;
      for (int s = 0; s < cpd.card; ++s) {
        row[s] = denom > 0.0 ? (row[s] + alpha) / denom : 1.0 / cpd.card;
      }
    }
    cpds.push_back(std::move(cpd));
  }
  return BayesianNetwork(dag, std::vector<int>(cardinalities.begin(), cardinalities.end()),
                         std::move(cpds));
}

LogLikelihood log_likelihood(const BayesianNetwork& bn, std::span<const QuantizedLatent> rows) {
  LogLikelihood ll;
  for (const auto& row : rows) {
    validate_states(row, bn.cardinalities());
    for (const auto& cpd : bn.cpds()) {
      const double p = cpd.prob(cpd.row_of(row.states), row.states[cpd.node]);
      if (p > 0.0) {
        ll.value += std::max(std::log(p), kLogFloor);
      } else {
        ll.value += kLogFloor;
        ll.floored = true;
      }
    }
  }
  return ll;
}

std::int64_t local_param_count(int card, std::span<const int> parent_cards) {
  std::int64_t rows = 1;
  for (int c : parent_cards) rows *= c;
  return static_cast<std::int64_t>(card - 1) * rows;
}

std::int64_t param_count(const BayesianNetwork& bn) {
  std::int64_t total = 0;
  for (const auto& cpd : bn.cpds()) total += local_param_count(cpd.card, cpd.parent_cards);
  return total;
}

double bic_score(const BayesianNetwork& bn, std::span<const QuantizedLatent> rows) {
  if (rows.empty()) throw Error(Errc::empty_dataset, "BIC needs at least one row");
  const double n = static_cast<double>(rows.size());
  return -(std::log(n) / 2.0) * static_cast<double>(param_count(bn)) +
         log_likelihood(bn, rows).value;
}

double local_bic(int node, std::span<const int> parent_set, const StateMatrix& data) {
  if (data.num_rows() == 0) throw Error(Errc::empty_dataset, "BIC needs at least one row");
  const auto parents = sorted_unique(parent_set);
  if (std::binary_search(parents.begin(), parents.end(), node)) {
    throw Error(Errc::invalid_argument, "parent set contains the node itself");
  }
  const auto& cards = data.cardinalities();
  const int k = cards[node];
  const auto counts = count_table(node, parents, data);
  double ll = 0.0;
  for (std::size_t r = 0; r < counts.size() / k; ++r) {
    const double* row = counts.data() + r * k;
    const double total = std::accumulate(row, row + k, 0.0);
    if (total <= 0.0) continue;
    for (int s = 0; s < k; ++s)
      if (row[s] > 0.0) ll += row[s] * std::log(row[s] / total);
  }
  std::vector<int> parent_cards;
  for (int p : parents) parent_cards.push_back(cards[p]);
  return ll - (std::log(static_cast<double>(data.num_rows())) / 2.0) *
                  static_cast<double>(local_param_count(k, parent_cards));
}

double local_bic(int node, std::span<const int> parent_set, std::span<const QuantizedLatent> rows,
                 std::span<const int> cardinalities) {
  return local_bic(node, parent_set, StateMatrix(rows, cardinalities));
}

// ---------------------------------------------------------------------------
// Structure search

namespace {

class LocalScoreCache {
 public:
  explicit LocalScoreCache(const StateMatrix& data) : data_(data) {}

  double operator()(int node, std::vector<int> parents) {
    std::sort(parents.begin(), parents.end());
    auto key = std::make_pair(node, std::move(parents));
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double s = local_bic(node, key.second, data_);
    cache_.emplace(std::move(key), s);
    return s;
  }

 private:
  const StateMatrix& data_;
  std::map<std::pair<int, std::vector<int>>, double> cache_;
};

std::vector<int> with(std::vector<int> set, int v) {
  set.insert(std::lower_bound(set.begin(), set.end(), v), v);
  return set;
}

std::vector<int> without(std::vector<int> set, int v) {
  set.erase(std::find(set.begin(), set.end(), v));
  return set;
}

}  // namespace

namespace {

// Greedy ascent from `dag` until no move improves by more than
// options.min_improvement or options.max_iters moves have been applied.
double climb(Dag& dag, LocalScoreCache& local, const HillClimbOptions& options,
             std::vector<HillClimbStep>* steps) {
  const int n = dag.num_nodes();
  std::vector<double> node_score(n);
  for (int v = 0; v < n; ++v) node_score[v] = local(v, dag.parents(v));
  double total = std::accumulate(node_score.begin(), node_score.end(), 0.0);

  for (int iter = 0; iter < options.max_iters; ++iter) {
    bool found = false;
    MoveType best_type = MoveType::add;
    Edge best_edge;
    double best_delta = 0.0;
    auto consider = [&](MoveType type, int u, int v, double delta) {
      const double tol = 1e-9 * std::max(1.0, std::abs(best_delta));
      if (!found || delta > best_delta + tol) {
        found = true;
        best_type = type;
        best_edge = {u, v};
        best_delta = delta;
      }
    };

    // Candidates are visited in (type, parent, child) order so that the first
    // of several near-equal deltas is the lexicographically smallest move.
    for (int u = 0; u < n; ++u) {
      for (int v = 0; v < n; ++v) {
        if (u == v || dag.has_edge(u, v)) continue;
        if (static_cast<int>(dag.parents(v).size()) >= options.max_parents) continue;
        if (dag.reachable(v, u)) continue;
        consider(MoveType::add, u, v, local(v, with(dag.parents(v), u)) - node_score[v]);
      }
    }
    for (const auto& e : dag.edges()) {
      consider(MoveType::remove, e.parent, e.child,
               local(e.child, without(dag.parents(e.child), e.parent)) - node_score[e.child]);
    }
    for (const auto& e : dag.edges()) {
      const int u = e.parent, v = e.child;
      if (static_cast<int>(dag.parents(u).size()) >= options.max_parents) continue;
      dag.remove_edge(u, v);
      const bool other_path = dag.reachable(u, v);
      dag.add_edge(u, v);
      if (other_path) continue;
      const double delta = local(v, without(dag.parents(v), u)) - node_score[v] +
                           local(u, with(dag.parents(u), v)) - node_score[u];
      consider(MoveType::reverse, u, v, delta);
    }

    if (!found || best_delta <= options.min_improvement) break;

    const int u = best_edge.parent, v = best_edge.child;
    switch (best_type) {
      case MoveType::add:
        dag.add_edge(u, v);
        break;
      case MoveType::remove:
        dag.remove_edge(u, v);
        break;
      case MoveType::reverse:
        dag.reverse_edge(u, v);
        node_score[u] = local(u, dag.parents(u));
        break;
    }
    node_score[v] = local(v, dag.parents(v));
    total = std::accumulate(node_score.begin(), node_score.end(), 0.0);
    if (steps) steps->push_back({best_type, best_edge, best_delta, total});
  }
  return total;
}

// Applies `count` uniformly drawn legal single-edge moves.
void perturb(Dag& dag, int count, int max_parents, Rng& rng) {
  const int n = dag.num_nodes();
  for (int c = 0; c < count; ++c) {
    std::vector<std::pair<MoveType, Edge>> moves;
    for (int u = 0; u < n; ++u) {
      for (int v = 0; v < n; ++v) {
        if (u == v) continue;
        if (dag.has_edge(u, v)) {
          moves.push_back({MoveType::remove, {u, v}});
          if (static_cast<int>(dag.parents(u).size()) >= max_parents) continue;
          dag.remove_edge(u, v);
          const bool other_path = dag.reachable(u, v);
          dag.add_edge(u, v);
          if (!other_path) moves.push_back({MoveType::reverse, {u, v}});
        } else if (!dag.has_edge(v, u) && static_cast<int>(dag.parents(v).size()) < max_parents &&
                   !dag.reachable(v, u)) {
          moves.push_back({MoveType::add, {u, v}});
        }
      }
    }
    if (moves.empty()) return;
    const auto [type, e] = moves[uniform_index(rng, static_cast<int>(moves.size()))];
    if (type == MoveType::add) dag.add_edge(e.parent, e.child);
    if (type == MoveType::remove) dag.remove_edge(e.parent, e.child);
    if (type == MoveType::reverse) dag.reverse_edge(e.parent, e.child);
  }
}

void check_search_args(std::span<const QuantizedLatent> rows, int max_parents) {
  if (rows.empty()) throw Error(Errc::empty_dataset, "hill climb needs at least one row");
  if (max_parents < 1) throw Error(Errc::invalid_argument, "max_parents must be >= 1");
}

}  // namespace

HillClimbResult hill_climb_traced(std::span<const QuantizedLatent> rows,
                                  std::span<const int> cardinalities,
                                  const HillClimbOptions& options) {
  check_search_args(rows, options.max_parents);
  const StateMatrix data(rows, cardinalities);
  LocalScoreCache local(data);
  HillClimbResult result{Dag(data.num_cols()), 0.0, {}};
  for (int v = 0; v < data.num_cols(); ++v) result.initial_score += local(v, {});
  climb(result.dag, local, options, &result.steps);
  return result;
}

Dag hill_climb(std::span<const QuantizedLatent> rows, std::span<const int> cardinalities,
               int max_parents, int max_iters, std::uint64_t seed, const RestartOptions& restarts) {
  check_search_args(rows, max_parents);
  if (restarts.restarts < 0 || restarts.perturb_moves < 1) {
    throw Error(Errc::invalid_argument, "restarts must be >= 0 and perturb_moves >= 1");
  }
  const StateMatrix data(rows, cardinalities);
  LocalScoreCache local(data);
  HillClimbOptions options;
  options.max_parents = max_parents;
  options.max_iters = max_iters;

  Dag best(data.num_cols());
  double best_score = climb(best, local, options, nullptr);
  Rng rng(seed);
  for (int r = 0; r < restarts.restarts; ++r) {
    Dag candidate = best;
    perturb(candidate, restarts.perturb_moves, max_parents, rng);
    const double score = climb(candidate, local, options, nullptr);
    if (score > best_score + 1e-9 * std::max(1.0, std::abs(best_score))) {
      best = std::move(candidate);
      best_score = score;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<QuantizedLatent> ancestral_sample(const BayesianNetwork& bn, int n, std::uint64_t seed) {
  if (n < 1) throw Error(Errc::invalid_argument, "sample count must be >= 1");
  const auto order = topological_order(bn.dag());
  Rng rng(seed);
  std::vector<QuantizedLatent> out(n);
  for (auto& sample : out) {
    sample.states.assign(bn.num_nodes(), 0);
    for (int v : order) {
      const auto& cpd = bn.cpd(v);
      const auto row = cpd.row(cpd.row_of(sample.states));
      const double u = uniform01(rng);
      double acc = 0.0;
      int s = cpd.card - 1;
      for (int k = 0; k < cpd.card; ++k) {
        acc += row[k];
        if (u < acc) {
          s = k;
          break;
        }
      }
      // Rounding can leave acc just under 1; fall back to the last state with
      // positive mass.
      if (acc <= u) {
        while (s > 0 && row[s] <= 0.0) --s;
      }
      sample.states[v] = s;
    }
  }
  return out;
}

BayesianNetwork random_network(std::span<const int> cardinalities,
                               const RandomNetworkOptions& options, std::uint64_t seed) {
  const int n = static_cast<int>(cardinalities.size());
  Rng rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

  std::vector<Edge> edges;
  for (int i = 1; i < n; ++i) {
    if (uniform01(rng) < options.root_probability) continue;
    const int limit = std::min(options.max_parents, i);
    const int count = 1 + uniform_index(rng, limit);
    std::vector<int> pool(order.begin(), order.begin() + i);
    for (int c = 0; c < count; ++c) {
      const int j = uniform_index(rng, static_cast<int>(pool.size()));
      edges.push_back({pool[j], order[i]});
      pool.erase(pool.begin() + j);
    }
  }
  Dag dag(n, edges);

  std::vector<Cpd> cpds;
  for (int v = 0; v < n; ++v) {
    Cpd cpd;
    cpd.node = v;
    cpd.parents = dag.parents(v);
    for (int p : cpd.parents) cpd.parent_cards.push_back(cardinalities[p]);
    cpd.card = cardinalities[v];
    cpd.table.resize(static_cast<std::size_t>(cpd.num_rows()) * cpd.card);
    for (int r = 0; r < cpd.num_rows(); ++r) {
      double* row = cpd.table.data() + static_cast<std::size_t>(r) * cpd.card;
      double sum = 0.0;
      for (int s = 0; s < cpd.card; ++s) {
        row[s] = -std::log(1.0 - uniform01(rng));
        sum += row[s];
      }
      const int dominant = uniform_index(rng, cpd.card);
      for (int s = 0; s < cpd.card; ++s) {
        row[s] = (1.0 - options.dominant_mass) * row[s] / sum +
                 (s == dominant ? options.dominant_mass : 0.0);
      }
    }
    cpds.push_back(std::move(cpd));
  }
  return BayesianNetwork(std::move(dag), std::vector<int>(cardinalities.begin(), cardinalities.end()),
                         std::move(cpds));
}

}  // namespace pgmsc
