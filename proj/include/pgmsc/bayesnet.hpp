#ifndef PGMSC_BAYESNET_HPP_
#define PGMSC_BAYESNET_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pgmsc/latent.hpp"

namespace pgmsc {

struct Edge {
  int parent = 0;
  int child = 0;

  auto operator<=>(const Edge&) const = default;
};

// Kahn's algorithm with lowest-index-first among ready nodes. A cyclic edge
// set raises Errc::cycle with one offending cycle in the message.
std::vector<int> topological_order(int num_nodes, std::span<const Edge> edges);

// Acyclic directed graph without self-loops or duplicate edges. Parent lists
// are kept sorted ascending.
class Dag {
 public:
  Dag() = default;
  explicit Dag(int num_nodes);
  Dag(int num_nodes, std::span<const Edge> edges);

  int num_nodes() const { return static_cast<int>(parents_.size()); }
  const std::vector<int>& parents(int node) const { return parents_.at(node); }
  std::vector<int> children(int node) const;
  bool has_edge(int parent, int child) const;
  // Sorted by (parent, child).
  std::vector<Edge> edges() const;
  std::size_t num_edges() const;

  // True when some directed path leads from `from` to `to`.
  bool reachable(int from, int to) const;

  // Mutators keep the invariants; they throw on cycles or duplicates.
  void add_edge(int parent, int child);
  void remove_edge(int parent, int child);
  void reverse_edge(int parent, int child);

  bool operator==(const Dag& other) const = default;

 private:
  void check_node(int node) const;
  std::vector<std::vector<int>> parents_;
};

std::vector<int> topological_order(const Dag& dag);

// Conditional table P(node | parents). Rows enumerate parent configurations
// row-major with the first (lowest-index) parent varying slowest.
struct Cpd {
  int node = 0;
  std::vector<int> parents;
  std::vector<int> parent_cards;
  int card = 0;
  std::vector<double> table;  // rows * card

  int num_rows() const;
  // Row index for a full state vector (only the parent entries are read).
  int row_of(std::span<const int> states) const;
  double prob(int row, int state) const { return table[static_cast<std::size_t>(row) * card + state]; }
  std::span<const double> row(int r) const {
    return std::span<const double>(table).subspan(static_cast<std::size_t>(r) * card, card);
  }

  bool operator==(const Cpd&) const = default;
};

class BayesianNetwork {
 public:
  BayesianNetwork() = default;
  // Validates parent sets against the DAG, table shapes and row sums (1e-9).
  BayesianNetwork(Dag dag, std::vector<int> cardinalities, std::vector<Cpd> cpds);

  int num_nodes() const { return dag_.num_nodes(); }
  const Dag& dag() const { return dag_; }
  const std::vector<int>& cardinalities() const { return cards_; }
  int cardinality(int node) const { return cards_.at(node); }
  const Cpd& cpd(int node) const { return cpds_.at(node); }
  const std::vector<Cpd>& cpds() const { return cpds_; }

  // ln P(full assignment); -inf when some factor is zero.
  double log_joint(std::span<const int> states) const;

  bool operator==(const BayesianNetwork&) const = default;

 private:
  Dag dag_;
  std::vector<int> cards_;
  std::vector<Cpd> cpds_;
};

// Column-major copy of quantized rows, the layout every counting routine uses.
class StateMatrix {
 public:
  StateMatrix(std::span<const QuantizedLatent> rows, std::span<const int> cardinalities);

  std::size_t num_rows() const { return num_rows_; }
  int num_cols() const { return static_cast<int>(cols_.size()); }
  const std::vector<int>& column(int c) const { return cols_[c]; }
  const std::vector<int>& cardinalities() const { return cards_; }

 private:
  std::size_t num_rows_ = 0;
  std::vector<int> cards_;
  std::vector<std::vector<int>> cols_;
};

// CPD entry = (count + alpha) / (row total + alpha * K); rows with no mass
// (possible only with alpha = 0) become uniform.
BayesianNetwork mle_fit(const Dag& dag, std::span<const QuantizedLatent> rows,
                        std::span<const int> cardinalities, double alpha);

// ln P(0) is replaced by kLogFloor; `floored` reports whether that happened.
inline constexpr double kLogFloor = -690.7755278982137;  // ln(1e-300)

struct LogLikelihood {
  double value = 0.0;
  bool floored = false;
};

LogLikelihood log_likelihood(const BayesianNetwork& bn, std::span<const QuantizedLatent> rows);

// Free parameters: sum over nodes of (K - 1) * prod(parent cards).
std::int64_t param_count(const BayesianNetwork& bn);
std::int64_t local_param_count(int card, std::span<const int> parent_cards);

// -(ln N / 2) * |B| + LL(B | D), natural log throughout.
double bic_score(const BayesianNetwork& bn, std::span<const QuantizedLatent> rows);

// Per-node BIC term using maximum-likelihood (alpha = 0) counts.
double local_bic(int node, std::span<const int> parent_set, std::span<const QuantizedLatent> rows,
                 std::span<const int> cardinalities);
double local_bic(int node, std::span<const int> parent_set, const StateMatrix& data);

struct HillClimbOptions {
  int max_parents = 3;
  int max_iters = 1000;
  double min_improvement = 1e-9;
};

enum class MoveType { add = 0, remove = 1, reverse = 2 };

struct HillClimbStep {
  MoveType type;
  Edge edge;  // the edge as it was named by the move (parent -> child before the move)
  double delta;
  double score;  // total BIC after the move
};

struct HillClimbResult {
  Dag dag;
  double initial_score = 0.0;
  std::vector<HillClimbStep> steps;
};

// Greedy search from the empty graph over single-edge additions, deletions and
// reversals, scored by decomposable BIC. The best move wins; near-equal deltas
// (relative 1e-9) fall back to the smallest (type, parent, child).
HillClimbResult hill_climb_traced(std::span<const QuantizedLatent> rows,
                                  std::span<const int> cardinalities,
                                  const HillClimbOptions& options = {});

// Perturb-and-reclimb restarts: each restart applies `perturb_moves` random
// legal moves to the best graph so far, climbs again, and keeps the result if
// its score is strictly higher.
struct RestartOptions {
  int restarts = 0;
  int perturb_moves = 3;
};

// The first climb is hill_climb_traced from the empty graph; `seed` drives
// only the restart perturbations.
Dag hill_climb(std::span<const QuantizedLatent> rows, std::span<const int> cardinalities,
               int max_parents, int max_iters, std::uint64_t seed, const RestartOptions& restarts = {});

std::vector<QuantizedLatent> ancestral_sample(const BayesianNetwork& bn, int n,
                                              std::uint64_t seed);

// Random generator network used by tests and the synthetic harness. Each node
// after the first in a random ordering draws 1..max_parents parents (with
// probability root_probability it stays a root). Every CPD row puts
// `dominant_mass` on one random state and spreads the rest with a flat
// Dirichlet draw.
struct RandomNetworkOptions {
  int max_parents = 2;
  double root_probability = 0.0;
  double dominant_mass = 0.85;
};

BayesianNetwork random_network(std::span<const int> cardinalities,
                               const RandomNetworkOptions& options, std::uint64_t seed);

}  // namespace pgmsc

#endif  // PGMSC_BAYESNET_HPP_
