#include <gtest/gtest.h>

#include <cmath>

#include "pgmsc/error.hpp"
#include "pgmsc/inference.hpp"
#include "support.hpp"

using namespace pgmsc;
using pgmsc::testing::for_each_assignment;
using pgmsc::testing::make_bn;

namespace {

BayesianNetwork bayes_pair() {
  // A -> B, P(A=1)=0.5, P(B=1|A=1)=0.9, P(B=1|A=0)=0.2.
  return make_bn({2, 2}, {{0, 1}}, {{0.5, 0.5}, {0.8, 0.2, 0.1, 0.9}});
}

double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

BayesianNetwork random_small_net(Rng& rng, std::uint64_t seed) {
  const int n = 1 + uniform_index(rng, 8);
  std::vector<int> cards(n);
  for (int& k : cards) k = 2 + uniform_index(rng, 2);
  RandomNetworkOptions opts;
  opts.max_parents = 1 + uniform_index(rng, 3);
  opts.root_probability = 0.2;
  opts.dominant_mass = 0.6 * uniform01(rng);
  return random_network(cards, opts, seed);
}

}  // namespace

TEST(Factor, ProductSumOutReduce) {
  Factor a{{0}, {2}, {0.3, 0.7}};
  Factor b{{0, 1}, {2, 2}, {0.9, 0.1, 0.2, 0.8}};
  const auto p = factor_product(a, b);
  EXPECT_EQ(p.scope, (std::vector<int>{0, 1}));
  EXPECT_NEAR(p.values[0], 0.27, 1e-15);
  EXPECT_NEAR(p.values[3], 0.56, 1e-15);
  const auto m = factor_sum_out(p, 0);
  EXPECT_EQ(m.scope, (std::vector<int>{1}));
  EXPECT_NEAR(m.values[0], 0.27 + 0.14, 1e-15);
  const auto r = factor_reduce(b, Evidence{{1, 1}});
  EXPECT_EQ(r.scope, (std::vector<int>{0}));
  EXPECT_EQ(r.values, (std::vector<double>{0.1, 0.8}));
}

TEST(Posterior, SingleNodePrior) {
  const auto bn = make_bn({3}, {}, {{0.2, 0.3, 0.5}});
  EXPECT_EQ(posterior_enumerate(bn, {}, 0), (std::vector<double>{0.2, 0.3, 0.5}));
  const auto ve = posterior_ve(bn, {}, 0);
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(ve[s], bn.cpd(0).prob(0, s), 1e-15);
}

TEST(Posterior, BayesRuleByHand) {
  const auto bn = bayes_pair();
  const Evidence ev{{1, 1}};
  EXPECT_NEAR(posterior_enumerate(bn, ev, 0)[1], 9.0 / 11.0, 1e-9);
  EXPECT_NEAR(posterior_ve(bn, ev, 0)[1], 9.0 / 11.0, 1e-9);
  EXPECT_NEAR(prob_of_state(bn, ev, 0, 1), 9.0 / 11.0, 1e-9);
}

TEST(Posterior, ParentsObservedGiveCpdRow) {
  const auto bn = random_network(std::vector<int>{2, 3, 2}, {}, 5);
  for (int v = 0; v < 3; ++v) {
    const auto& pa = bn.dag().parents(v);
    if (pa.empty()) continue;
    Evidence ev;
    std::vector<int> states(3, 0);
    for (int p : pa) ev[p] = states[p] = bn.cardinality(p) - 1;
    const auto post = posterior_ve(bn, ev, v);
    const auto row = bn.cpd(v).row(bn.cpd(v).row_of(states));
    for (int s = 0; s < bn.cardinality(v); ++s) EXPECT_NEAR(post[s], row[s], 1e-12);
  }
}

TEST(Posterior, ChainForwardRecursion) {
  // Ten-node binary chain; the marginal of node 2 given nothing follows the
  // forward recursion, and conditioning on node 0 shifts it accordingly.
  std::vector<Edge> edges;
  std::vector<std::vector<double>> tables = {{0.3, 0.7}};
  for (int i = 1; i < 10; ++i) {
    edges.push_back({i - 1, i});
    tables.push_back({0.8, 0.2, 0.35, 0.65});
  }
  const auto bn = make_bn(std::vector<int>(10, 2), edges, tables);
  const Evidence ev{{0, 0}};
  // Hand recursion on the prefix 0 -> 1 -> 2 with node 0 fixed at 0.
  const double p1 = 0.2;                         // P(x1 = 1 | x0 = 0)
  const double p2 = (1 - p1) * 0.2 + p1 * 0.65;  // P(x2 = 1 | x0 = 0)
  EXPECT_NEAR(posterior_ve(bn, ev, 2)[1], p2, 1e-12);
  EXPECT_NEAR(posterior_enumerate(bn, ev, 2)[1], p2, 1e-12);
  // Evidence at the far end, query at the near end: agreement with the oracle.
  EXPECT_LT(tv(posterior_ve(bn, Evidence{{9, 1}}, 0), posterior_enumerate(bn, Evidence{{9, 1}}, 0)), 1e-12);
}

TEST(Posterior, DisconnectedNodeKeepsItsPrior) {
  const auto bn = make_bn({2, 2, 3}, {{0, 1}}, {{0.5, 0.5}, {0.8, 0.2, 0.1, 0.9}, {0.1, 0.6, 0.3}});
  const auto post = posterior_ve(bn, Evidence{{0, 1}, {1, 0}}, 2);
  EXPECT_NEAR(post[0], 0.1, 1e-15);
  EXPECT_NEAR(post[1], 0.6, 1e-15);
  EXPECT_NEAR(post[2], 0.3, 1e-15);
}

TEST(Posterior, ZeroEvidenceAndBadQueriesThrow) {
  const auto bn = make_bn({2, 2}, {{0, 1}}, {{1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}});
  for (auto* fn : {&posterior_ve, &posterior_enumerate}) {
    try {
      fn(bn, Evidence{{1, 1}}, 0);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::zero_evidence);
    }
    EXPECT_THROW(fn(bn, Evidence{{0, 0}}, 0), Error);
    EXPECT_THROW(fn(bn, Evidence{{1, 5}}, 0), Error);
  }
}

TEST(Posterior, VeMatchesEnumerationOnRandomNetworks) {
  Rng rng(2024);
  int checked = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto bn = random_small_net(rng, t);
    const int n = bn.num_nodes();
    const int query = uniform_index(rng, n);
    Evidence ev;
    for (int v = 0; v < n; ++v)
      if (v != query && uniform01(rng) < 0.4) ev[v] = uniform_index(rng, bn.cardinality(v));
    std::vector<double> exact;
    try {
      exact = posterior_enumerate(bn, ev, query);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::zero_evidence);
      EXPECT_THROW(posterior_ve(bn, ev, query), Error);
      continue;
    }
    const auto ve = posterior_ve(bn, ev, query);
    double sum = 0.0;
    for (double p : ve) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_LT(tv(ve, exact), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 90);
}

TEST(MapState, DeterministicCopyAndTieBreak) {
  const auto copy = make_bn({3, 3}, {{0, 1}}, {{0.2, 0.3, 0.5}, {1, 0, 0, 0, 1, 0, 0, 0, 1}});
  const auto m = map_state(copy, Evidence{{0, 2}}, 1);
  EXPECT_EQ(m.state, 2);
  EXPECT_DOUBLE_EQ(m.probability, 1.0);

  const auto uniform = make_bn({2, 2}, {}, {{0.5, 0.5}, {0.5, 0.5}});
  const auto u = map_state(uniform, {}, 0);
  EXPECT_EQ(u.state, 0);
  EXPECT_DOUBLE_EQ(u.probability, 0.5);
  EXPECT_EQ(argmax_with_ties(std::vector<double>{0.2, 0.4, 0.4 + 1e-14}), 1);
}

TEST(MapState, MatchesEnumerationArgmax) {
  Rng rng(500);
  for (std::uint64_t t = 0; t < 500; ++t) {
    std::vector<int> cards(2 + uniform_index(rng, 4));
    for (int& k : cards) k = 2 + uniform_index(rng, 2);
    RandomNetworkOptions opts;
    opts.dominant_mass = 0.5;
    const auto bn = random_network(cards, opts, t + 1000);
    const int node = uniform_index(rng, bn.num_nodes());
    Evidence ev;
    for (int v = 0; v < bn.num_nodes(); ++v)
      if (v != node && uniform01(rng) < 0.5) ev[v] = uniform_index(rng, cards[v]);
    const auto exact = posterior_enumerate(bn, ev, node);
    int best = 0;
    for (int s = 1; s < static_cast<int>(exact.size()); ++s)
      if (exact[s] > exact[best] + 1e-12) best = s;
    const auto m = map_state(bn, ev, node);
    EXPECT_EQ(m.state, best);
    EXPECT_NEAR(m.probability, exact[best], 1e-9);
  }
}

TEST(ProbOfState, PriorMassAndDeterministicCopy) {
  const auto bn = make_bn({3, 3}, {{0, 1}}, {{0.2, 0.3, 0.5}, {1, 0, 0, 0, 1, 0, 0, 0, 1}});
  EXPECT_NEAR(prob_of_state(bn, {}, 0, 2), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(prob_of_state(bn, Evidence{{0, 1}}, 1, 1), 1.0);
  EXPECT_THROW(prob_of_state(bn, {}, 0, 3), Error);
}

TEST(Posterior, SmoothedNetworksNeverHitZeroEvidence) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::vector<int> cards = {3, 3, 3, 3, 3};
    const auto truth = random_network(cards, {}, seed);
    const auto rows = ancestral_sample(truth, 200, seed);
    const auto bn = mle_fit(truth.dag(), rows, cards, 1.0);
    Evidence ev;
    for (int v = 0; v < 4; ++v) ev[v] = map_state(bn, ev, v).state;
    EXPECT_NO_THROW(map_state(bn, ev, 4));
  }
}
