#ifndef PGMSC_TESTS_SUPPORT_HPP_
#define PGMSC_TESTS_SUPPORT_HPP_

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pgmsc/bayesnet.hpp"
#include "pgmsc/latent.hpp"
#include "pgmsc/random.hpp"

namespace pgmsc::testing {

// Builds a network from per-node tables; parent order follows the Dag.
inline BayesianNetwork make_bn(const std::vector<int>& cards, const std::vector<Edge>& edges,
                               const std::vector<std::vector<double>>& tables) {
  Dag dag(static_cast<int>(cards.size()), edges);
  std::vector<Cpd> cpds;
  for (int v = 0; v < static_cast<int>(cards.size()); ++v) {
    Cpd c;
    c.node = v;
    c.parents = dag.parents(v);
    for (int p : c.parents) c.parent_cards.push_back(cards[p]);
    c.card = cards[v];
    c.table = tables[v];
    cpds.push_back(std::move(c));
  }
  return BayesianNetwork(std::move(dag), cards, std::move(cpds));
}

// Calls fn(states) for every joint assignment, last node varying fastest.
template <typename Fn>
void for_each_assignment(const std::vector<int>& cards, Fn&& fn) {
  std::vector<int> s(cards.size(), 0);
  while (true) {
    fn(s);
    int i = static_cast<int>(cards.size()) - 1;
    while (i >= 0 && ++s[i] == cards[i]) s[i--] = 0;
    if (i < 0) return;
  }
}

inline Dataset random_dataset(const FeatureSchema& schema, int n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<LatentVector> rows;
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(schema.total_dim());
    for (double& x : v) x = g(rng);
    rows.emplace_back(schema, std::move(v));
  }
  return Dataset(schema, std::move(rows));
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pgmsc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace pgmsc::testing

#endif  // PGMSC_TESTS_SUPPORT_HPP_
