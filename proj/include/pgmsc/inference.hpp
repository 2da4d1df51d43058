#ifndef PGMSC_INFERENCE_HPP_
#define PGMSC_INFERENCE_HPP_

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "pgmsc/bayesnet.hpp"

namespace pgmsc {

// Observed node -> state.
using Evidence = std::map<int, int>;

// Probabilities closer than this are treated as equal when picking an argmax,
// so that the lowest index wins regardless of summation order.
inline constexpr double kTieTolerance = 1e-12;

// Nonnegative table over the joint states of `scope` (ascending node indices,
// first node varying slowest).
struct Factor {
  std::vector<int> scope;
  std::vector<int> cards;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

Factor factor_product(const Factor& a, const Factor& b);
Factor factor_sum_out(const Factor& f, int node);
Factor factor_reduce(const Factor& f, const Evidence& evidence);

// Brute-force reference: sums the joint over every completion of the
// evidence. Exponential in the number of nodes.
std::vector<double> posterior_enumerate(const BayesianNetwork& bn, const Evidence& evidence,
                                        int query);

// Variable elimination on the query's relevant subgraph (ancestors of the
// query and evidence), eliminating hidden nodes by minimum degree with
// lowest-index ties.
std::vector<double> posterior_ve(const BayesianNetwork& bn, const Evidence& evidence, int query);

struct MapResult {
  int state = 0;
  double probability = 0.0;
};

// Index of the largest entry; entries within kTieTolerance of the running
// best keep the lower index.
int argmax_with_ties(std::span<const double> values);

MapResult map_state(const BayesianNetwork& bn, const Evidence& evidence, int node);

double prob_of_state(const BayesianNetwork& bn, const Evidence& evidence, int node, int state);

}  // namespace pgmsc

#endif  // PGMSC_INFERENCE_HPP_
