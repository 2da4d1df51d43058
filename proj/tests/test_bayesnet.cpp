#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "pgmsc/bayesnet.hpp"
#include "pgmsc/error.hpp"
#include "support.hpp"

using namespace pgmsc;
using pgmsc::testing::for_each_assignment;
using pgmsc::testing::make_bn;

namespace {

std::vector<QuantizedLatent> rows_of(const std::vector<std::vector<int>>& raw) {
  std::vector<QuantizedLatent> out;
  for (const auto& r : raw) out.push_back(QuantizedLatent{r});
  return out;
}

// Count-based BIC written independently of the library: groups rows by
// parent tuple with std::map and applies the textbook formula.
double oracle_bic(int n_nodes, const std::vector<Edge>& edges, const std::vector<QuantizedLatent>& rows,
                  const std::vector<int>& cards) {
  double total = 0.0;
  const double n = static_cast<double>(rows.size());
  for (int v = 0; v < n_nodes; ++v) {
    std::vector<int> pa;
    for (const auto& e : edges)
      if (e.child == v) pa.push_back(e.parent);
    std::map<std::vector<int>, std::map<int, double>> counts;
    for (const auto& r : rows) {
      std::vector<int> key;
      for (int p : pa) key.push_back(r.states[p]);
      counts[key][r.states[v]] += 1.0;
    }
    for (const auto& [key, by_state] : counts) {
      double row_total = 0.0;
      for (const auto& [s, c] : by_state) row_total += c;
      for (const auto& [s, c] : by_state) total += c * std::log(c / row_total);
    }
    double configs = 1.0;
    for (int p : pa) configs *= cards[p];
    total -= 0.5 * std::log(n) * (cards[v] - 1) * configs;
  }
  return total;
}

bool acyclic(int n, const std::vector<Edge>& edges) {
  try {
    topological_order(n, edges);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::set<std::pair<int, int>> skeleton(const std::vector<Edge>& edges) {
  std::set<std::pair<int, int>> s;
  for (const auto& e : edges) s.insert({std::min(e.parent, e.child), std::max(e.parent, e.child)});
  return s;
}

// Every DAG over n nodes, by subsets of the n(n-1) directed edges.
std::vector<std::vector<Edge>> all_dags(int n) {
  std::vector<Edge> cand;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) cand.push_back({a, b});
  std::vector<std::vector<Edge>> out;
  for (unsigned mask = 0; mask < (1u << cand.size()); ++mask) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < cand.size(); ++i)
      if (mask & (1u << i)) e.push_back(cand[i]);
    if (acyclic(n, e)) out.push_back(e);
  }
  return out;
}

std::vector<Edge> best_dag(int n, const std::vector<QuantizedLatent>& rows, const std::vector<int>& cards) {
  std::vector<Edge> best;
  double best_score = -INFINITY;
  for (const auto& d : all_dags(n)) {
    const double s = oracle_bic(n, d, rows, cards);
    if (s > best_score + 1e-9) {
      best_score = s;
      best = d;
    }
  }
  return best;
}

BayesianNetwork chain3() {
  return make_bn({2, 2, 2}, {{0, 1}, {1, 2}},
                 {{0.4, 0.6}, {0.9, 0.1, 0.15, 0.85}, {0.8, 0.2, 0.1, 0.9}});
}

}  // namespace

TEST(TopologicalOrder, Examples) {
  EXPECT_EQ(topological_order(3, std::vector<Edge>{}), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(topological_order(3, std::vector<Edge>{{0, 1}, {1, 2}}), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(topological_order(3, std::vector<Edge>{{2, 0}}), (std::vector<int>{1, 2, 0}));
  try {
    topological_order(2, std::vector<Edge>{{0, 1}, {1, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::cycle);
  }
}

TEST(Dag, RejectsCyclesSelfLoopsAndDuplicates) {
  EXPECT_THROW(Dag(3, std::vector<Edge>{{0, 1}, {1, 2}, {2, 0}}), Error);
  EXPECT_THROW(Dag(2, std::vector<Edge>{{1, 1}}), Error);
  EXPECT_THROW(Dag(2, std::vector<Edge>{{0, 1}, {0, 1}}), Error);
  Dag d(3, std::vector<Edge>{{0, 1}, {1, 2}});
  EXPECT_THROW(d.add_edge(2, 0), Error);
  EXPECT_TRUE(d.reachable(0, 2));
  d.reverse_edge(1, 2);
  EXPECT_TRUE(d.has_edge(2, 1));
  d.remove_edge(0, 1);
  EXPECT_EQ(d.num_edges(), 1u);
}

TEST(BayesianNetwork, RejectsBadRowSums) {
  EXPECT_THROW(make_bn({2, 2}, {}, {{0.5, 0.6}, {0.5, 0.5}}), Error);
  EXPECT_THROW(make_bn({2, 2}, {{0, 1}}, {{0.5, 0.5}, {0.5, 0.5}}), Error);
}

TEST(MleFit, CountRatios) {
  const std::vector<int> cards = {2};
  const auto rows = rows_of({{1}, {1}, {0}, {1}});
  const auto bn0 = mle_fit(Dag(1), rows, cards, 0.0);
  EXPECT_DOUBLE_EQ(bn0.cpd(0).prob(0, 1), 0.75);
  const auto bn1 = mle_fit(Dag(1), rows, cards, 1.0);
  EXPECT_NEAR(bn1.cpd(0).prob(0, 1), 2.0 / 3.0, 1e-15);
}

TEST(MleFit, DeterministicCopyAndUnseenRowsUniform) {
  const std::vector<int> cards = {3, 3};
  const auto rows = rows_of({{0, 0}, {1, 1}, {0, 0}});
  const auto bn = mle_fit(Dag(2, std::vector<Edge>{{0, 1}}), rows, cards, 0.0);
  EXPECT_DOUBLE_EQ(bn.cpd(1).prob(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(bn.cpd(1).prob(1, 1), 1.0);
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(bn.cpd(1).prob(2, s), 1.0 / 3.0, 1e-15);
}

TEST(MleFit, RowsSumToOneOnRandomData) {
  Rng rng(3);
  const std::vector<int> cards = {3, 2, 4, 2};
  std::vector<QuantizedLatent> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({{uniform_index(rng, 3), uniform_index(rng, 2), uniform_index(rng, 4), uniform_index(rng, 2)}});
  for (double alpha : {0.0, 0.5, 1.0}) {
    const auto bn = mle_fit(Dag(4, std::vector<Edge>{{0, 2}, {1, 2}, {2, 3}}), rows, cards, alpha);
    for (const auto& c : bn.cpds())
      for (int r = 0; r < c.num_rows(); ++r) {
        double s = 0.0;
        for (double p : c.row(r)) s += p;
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
  }
}

TEST(MleFit, MaximizesLikelihoodUnderPerturbation) {
  const auto truth = random_network(std::vector<int>{3, 2, 3}, {}, 21);
  const auto rows = ancestral_sample(truth, 500, 5);
  const std::vector<int> cards = {3, 2, 3};
  const auto fit = mle_fit(truth.dag(), rows, cards, 0.0);
  const double ll = log_likelihood(fit, rows).value;
  for (int v = 0; v < 3; ++v) {
    for (int r = 0; r < fit.cpd(v).num_rows(); ++r) {
      for (int s = 0; s < fit.cpd(v).card; ++s) {
        for (double delta : {-0.01, 0.01}) {
          auto cpds = fit.cpds();
          auto& c = cpds[v];
          const std::size_t base = static_cast<std::size_t>(r) * c.card;
          c.table[base + s] = std::max(0.0, c.table[base + s] + delta);
          double sum = 0.0;
          for (int t = 0; t < c.card; ++t) sum += c.table[base + t];
          for (int t = 0; t < c.card; ++t) c.table[base + t] /= sum;
          const BayesianNetwork perturbed(fit.dag(), cards, cpds);
          EXPECT_LE(log_likelihood(perturbed, rows).value, ll + 1e-9);
        }
      }
    }
  }
}

TEST(LogLikelihood, HandComputedAndFloor) {
  const auto bn = make_bn({2}, {}, {{0.25, 0.75}});
  const auto rows = rows_of({{1}, {1}, {0}, {1}});
  const auto ll = log_likelihood(bn, rows);
  EXPECT_NEAR(ll.value, -2.2493405784, 1e-9);
  EXPECT_FALSE(ll.floored);

  const auto det = make_bn({2}, {}, {{0.0, 1.0}});
  EXPECT_EQ(log_likelihood(det, rows_of({{1}})).value, 0.0);
  const auto zero = log_likelihood(det, rows_of({{0}}));
  EXPECT_TRUE(zero.floored);
  EXPECT_DOUBLE_EQ(zero.value, kLogFloor);
}

TEST(LogLikelihood, DecomposesIntoJointLogProbabilities) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::vector<int> cards = {2, 3, 2, 2};
    const auto bn = random_network(cards, {}, seed);
    std::vector<QuantizedLatent> rows;
    for_each_assignment(cards, [&](const std::vector<int>& s) { rows.push_back({s}); });
    double by_joint = 0.0;
    for (const auto& r : rows) {
      // Joint probability by direct product over nodes.
      double p = 1.0;
      for (int v = 0; v < 4; ++v) p *= bn.cpd(v).prob(bn.cpd(v).row_of(r.states), r.states[v]);
      by_joint += std::log(p);
    }
    EXPECT_NEAR(log_likelihood(bn, rows).value, by_joint, 1e-9);
  }
}

TEST(ParamCount, Examples) {
  EXPECT_EQ(param_count(make_bn({2}, {}, {{0.5, 0.5}})), 1);
  EXPECT_EQ(param_count(make_bn({2, 2}, {{0, 1}}, {{0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}})), 3);
  const std::vector<int> pc = {8, 8};
  EXPECT_EQ(local_param_count(8, pc), 448);
}

TEST(Bic, SingleBinaryNodeFixture) {
  const std::vector<int> cards = {2};
  const auto rows = rows_of({{1}, {1}, {0}, {1}});
  const auto bn = mle_fit(Dag(1), rows, cards, 0.0);
  EXPECT_NEAR(bic_score(bn, rows), -2.9424877590, 1e-8);
}

TEST(Bic, SingleRowDeterministicFitScoresZero) {
  const std::vector<int> cards = {3, 2};
  const auto rows = rows_of({{2, 1}});
  const auto bn = mle_fit(Dag(2, std::vector<Edge>{{0, 1}}), rows, cards, 0.0);
  EXPECT_EQ(bic_score(bn, rows), 0.0);
}

TEST(Bic, EqualsSumOfLocalScoresOnRandomStructures) {
  Rng rng(17);
  const std::vector<int> cards = {2, 3, 2, 4};
  for (int t = 0; t < 100; ++t) {
    std::vector<QuantizedLatent> rows;
    const int n = 5 + uniform_index(rng, 100);
    for (int i = 0; i < n; ++i)
      rows.push_back({{uniform_index(rng, 2), uniform_index(rng, 3), uniform_index(rng, 2), uniform_index(rng, 4)}});
    std::vector<Edge> edges;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        if (uniform01(rng) < 0.5) edges.push_back(uniform01(rng) < 0.5 ? Edge{a, b} : Edge{b, a});
    if (!acyclic(4, edges)) continue;
    const Dag dag(4, edges);
    const auto bn = mle_fit(dag, rows, cards, 0.0);
    double local = 0.0;
    for (int v = 0; v < 4; ++v) local += local_bic(v, dag.parents(v), rows, cards);
    EXPECT_NEAR(bic_score(bn, rows), local, 1e-9);
    EXPECT_NEAR(bic_score(bn, rows), oracle_bic(4, edges, rows, cards), 1e-9);
  }
}

TEST(LocalBic, IndependentParentLowersScore) {
  Rng rng(8);
  const std::vector<int> cards = {3, 2};
  std::vector<QuantizedLatent> rows;
  for (int i = 0; i < 10000; ++i) rows.push_back({{uniform_index(rng, 3), uniform_index(rng, 2)}});
  const std::vector<int> none, one = {0};
  EXPECT_LT(local_bic(1, one, rows, cards), local_bic(1, none, rows, cards));
  EXPECT_THROW(local_bic(1, std::vector<int>{1}, rows, cards), Error);
}

TEST(HillClimb, IndependentColumnsGiveEmptyGraph) {
  Rng rng(1);
  const std::vector<int> cards = {2, 2};
  std::vector<QuantizedLatent> rows;
  for (int i = 0; i < 5000; ++i) rows.push_back({{uniform_index(rng, 2), uniform_index(rng, 2)}});
  const auto dag = hill_climb(rows, cards, 3, 100, 0);
  EXPECT_EQ(dag.edges(), best_dag(2, rows, cards));
  EXPECT_EQ(dag.num_edges(), 0u);
}

TEST(HillClimb, CorrelatedColumnsGiveOneEdge) {
  Rng rng(2);
  const std::vector<int> cards = {2, 2};
  std::vector<QuantizedLatent> rows;
  for (int i = 0; i < 5000; ++i) {
    const int a = uniform_index(rng, 2);
    rows.push_back({{a, a}});
  }
  const auto dag = hill_climb(rows, cards, 3, 100, 0);
  ASSERT_EQ(dag.num_edges(), 1u);
  // Both directions score the same; the tie goes to the smaller move.
  EXPECT_TRUE(dag.has_edge(0, 1));
  EXPECT_EQ(skeleton(dag.edges()), skeleton(best_dag(2, rows, cards)));
}

TEST(HillClimb, ChainSkeletonMatchesExhaustiveSearch) {
  const auto rows = ancestral_sample(chain3(), 20000, 9);
  const std::vector<int> cards = {2, 2, 2};
  const auto dag = hill_climb(rows, cards, 3, 100, 0);
  const std::set<std::pair<int, int>> expected = {{0, 1}, {1, 2}};
  EXPECT_EQ(skeleton(dag.edges()), expected);
  EXPECT_EQ(skeleton(best_dag(3, rows, cards)), expected);
}

TEST(HillClimb, RespectsCapAcyclicityAndStrictImprovement) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::vector<int> cards = {2, 3, 2, 3, 2, 2};
    RandomNetworkOptions opts;
    opts.max_parents = 3;
    const auto truth = random_network(cards, opts, seed);
    const auto rows = ancestral_sample(truth, 2000, seed + 100);
    for (int cap : {1, 2}) {
      HillClimbOptions hc;
      hc.max_parents = cap;
      const auto res = hill_climb_traced(rows, cards, hc);
      EXPECT_NO_THROW(topological_order(res.dag));
      for (int v = 0; v < 6; ++v) EXPECT_LE(static_cast<int>(res.dag.parents(v).size()), cap);
      double prev = res.initial_score;
      for (const auto& step : res.steps) {
        EXPECT_GT(step.score, prev);
        EXPECT_GT(step.delta, 1e-9);
        prev = step.score;
      }
      const auto fitted = mle_fit(res.dag, rows, cards, 0.0);
      EXPECT_NEAR(bic_score(fitted, rows), prev, 1e-6);
    }
  }
}

TEST(HillClimb, DeterministicAcrossCalls) {
  const std::vector<int> cards = {3, 3, 3, 3};
  const auto rows = ancestral_sample(random_network(cards, {}, 4), 3000, 4);
  EXPECT_EQ(hill_climb(rows, cards, 2, 100, 1), hill_climb(rows, cards, 2, 100, 1));
}

TEST(HillClimb, RestartsNeverLowerTheScore) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::vector<int> cards = {3, 2, 3, 3, 2, 3, 2};
    RandomNetworkOptions opts;
    opts.max_parents = 2;
    const auto rows = ancestral_sample(random_network(cards, opts, seed + 40), 3000, seed);
    const auto plain = hill_climb(rows, cards, 2, 1000, seed);
    const auto restarted = hill_climb(rows, cards, 2, 1000, seed, {20, 4});
    EXPECT_EQ(plain, hill_climb_traced(rows, cards, {2, 1000, 1e-9}).dag);
    EXPECT_NO_THROW(topological_order(restarted));
    for (int v = 0; v < 7; ++v) EXPECT_LE(static_cast<int>(restarted.parents(v).size()), 2);
    EXPECT_GE(bic_score(mle_fit(restarted, rows, cards, 0.0), rows),
              bic_score(mle_fit(plain, rows, cards, 0.0), rows) - 1e-9);
    EXPECT_EQ(restarted, hill_climb(rows, cards, 2, 1000, seed, {20, 4}));
  }
}

TEST(HillClimb, RejectsBadRestartSettings) {
  const std::vector<int> cards = {2, 2};
  const std::vector<QuantizedLatent> rows = {{{0, 1}}};
  EXPECT_THROW(hill_climb(rows, cards, 2, 10, 0, {-1, 3}), Error);
  EXPECT_THROW(hill_climb(rows, cards, 2, 10, 0, {1, 0}), Error);
}

TEST(AncestralSample, DeterministicCpdsGiveTheConsistentAssignment) {
  const auto bn = make_bn({2, 3}, {{0, 1}}, {{0.0, 1.0}, {1, 0, 0, 0, 0, 1}});
  for (const auto& r : ancestral_sample(bn, 50, 3)) EXPECT_EQ(r.states, (std::vector<int>{1, 2}));
}

TEST(AncestralSample, BinaryFrequency) {
  const auto bn = make_bn({2}, {}, {{0.25, 0.75}});
  const auto rows = ancestral_sample(bn, 100000, 77);
  double ones = 0.0;
  for (const auto& r : rows) ones += r.states[0];
  EXPECT_NEAR(ones / 100000.0, 0.75, 0.01);
  EXPECT_EQ(rows, ancestral_sample(bn, 100000, 77));
}

TEST(AncestralSample, PairwiseTablesMatchEnumeratedJoint) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const std::vector<int> cards = {2, 3, 2};
    RandomNetworkOptions opts;
    opts.dominant_mass = 0.5;
    const auto bn = random_network(cards, opts, seed);
    const int n = 100000;
    const auto rows = ancestral_sample(bn, n, seed + 50);
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        std::map<std::pair<int, int>, double> exact, emp;
        for_each_assignment(cards, [&](const std::vector<int>& s) {
          exact[{s[a], s[b]}] += std::exp(bn.log_joint(s));
        });
        for (const auto& r : rows) emp[{r.states[a], r.states[b]}] += 1.0 / n;
        double tv = 0.0;
        for (const auto& [k, p] : exact) tv += std::abs(p - emp[k]);
        EXPECT_LT(0.5 * tv, 0.02);
      }
  }
}
