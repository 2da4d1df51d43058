#include "pgmsc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pgmsc/error.hpp"
#include "pgmsc/random.hpp"

namespace pgmsc {

using nlohmann::json;

std::uint64_t stage_seed(std::uint64_t master, Stage stage) {
  return derive_seed(master, static_cast<std::uint64_t>(stage));
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_argument, "config: " + msg); };
  const auto sch = schema();  // checks F >= 2 and widths
  const int num_f = sch.num_features();
  if (clusters < 2) fail("clusters must be >= 2");
  if (kmeans_batch < 1 || kmeans_epochs < 1) fail("k-means batch and epochs must be >= 1");
  if (retained < 1 || retained >= num_f) fail("retained must lie in [1, F)");
  if (n_discard < 0 || n_discard > num_f - retained) fail("n_discard must lie in [0, F - retained]");
  if (!(tau >= 0.0 && tau < 1.0)) fail("tau must lie in [0, 1)");
  if (snr_grid.empty()) fail("snr_grid must not be empty");
  if (!(train_snr_lo <= train_snr_hi)) fail("train SNR range must satisfy lo <= hi");
  if (max_parents < 1 || max_iters < 0) fail("hill-climb caps must be positive");
  if (hill_climb_restarts < 0 || hill_climb_perturb < 1) fail("hill-climb restart settings out of range");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (importance_trials < 1) fail("importance_trials must be >= 1");
  if (!(channel_ratio > 0.0)) fail("channel_ratio must be positive");
  if (hidden < 0) fail("hidden must be >= 0");
  if (coder_epochs < 1 || coder_batch < 1 || !(coder_lr > 0.0)) fail("coder epochs, batch and lr must be positive");
  if (optimizer != "adam" && optimizer != "sgd") fail("optimizer must be 'adam' or 'sgd'");
  if (coder_train_rows < 1) fail("coder_train_rows must be >= 1");
  if (generator.max_parents < 1) fail("generator.max_parents must be >= 1");
  if (!(generator.jitter >= 0.0)) fail("generator.jitter must be >= 0");
  if (!(generator.dominant_mass >= 0.0 && generator.dominant_mass <= 1.0)) fail("generator.dominant_mass must lie in [0, 1]");
  if (!(generator.root_probability >= 0.0 && generator.root_probability <= 1.0)) fail("generator.root_probability must lie in [0, 1]");
  if (!(generator.center_spread > 0.0)) fail("generator.center_spread must be positive");
}

namespace {

json generator_json(const GeneratorConfig& g) {
  return json{{"seed", g.seed},
              {"max_parents", g.max_parents},
              {"root_probability", g.root_probability},
              {"dominant_mass", g.dominant_mass},
              {"jitter", g.jitter},
              {"center_spread", g.center_spread}};
}

json config_json(const ExperimentConfig& c) {
  return json{{"block_dims", c.block_dims},
              {"clusters", c.clusters},
              {"kmeans_batch", c.kmeans_batch},
              {"kmeans_epochs", c.kmeans_epochs},
              {"retained", c.retained},
              {"n_discard", c.n_discard},
              {"tau", c.tau},
              {"single_shot", c.single_shot},
              {"snr_grid", c.snr_grid},
              {"train_snr_lo", c.train_snr_lo},
              {"train_snr_hi", c.train_snr_hi},
              {"max_parents", c.max_parents},
              {"max_iters", c.max_iters},
              {"hill_climb_restarts", c.hill_climb_restarts},
              {"hill_climb_perturb", c.hill_climb_perturb},
              {"alpha", c.alpha},
              {"importance_trials", c.importance_trials},
              {"channel_ratio", c.channel_ratio},
              {"hidden", c.hidden},
              {"coder_epochs", c.coder_epochs},
              {"coder_lr", c.coder_lr},
              {"coder_batch", c.coder_batch},
              {"optimizer", c.optimizer},
              {"coder_train_rows", c.coder_train_rows},
              {"seed", c.seed},
              {"generator", generator_json(c.generator)}};
}

template <typename T>
void take(const json& j, const char* key, T& field, std::set<std::string>& seen) {
  auto it = j.find(key);
  if (it == j.end()) return;
  seen.insert(key);
  it->get_to(field);
}

void reject_unknown(const json& j, const std::set<std::string>& seen, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!seen.count(it.key())) throw Error(Errc::invalid_argument, "config: unknown key " + where + it.key());
  }
}

ExperimentConfig config_from(const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, "config: top level must be an object");
  ExperimentConfig c;
  std::set<std::string> seen;
  try {
    if (j.contains("num_features") || j.contains("block_dim")) {
      // Shorthand for a uniform schema.
      int nf = static_cast<int>(c.block_dims.size());
      int bd = c.block_dims.front();
      take(j, "num_features", nf, seen);
      take(j, "block_dim", bd, seen);
      c.block_dims.assign(std::max(nf, 0), bd);
    }
    take(j, "block_dims", c.block_dims, seen);
    take(j, "clusters", c.clusters, seen);
    take(j, "kmeans_batch", c.kmeans_batch, seen);
    take(j, "kmeans_epochs", c.kmeans_epochs, seen);
    take(j, "retained", c.retained, seen);
    take(j, "n_discard", c.n_discard, seen);
    take(j, "tau", c.tau, seen);
    take(j, "single_shot", c.single_shot, seen);
    take(j, "snr_grid", c.snr_grid, seen);
    take(j, "train_snr_lo", c.train_snr_lo, seen);
    take(j, "train_snr_hi", c.train_snr_hi, seen);
    take(j, "max_parents", c.max_parents, seen);
    take(j, "max_iters", c.max_iters, seen);
    take(j, "hill_climb_restarts", c.hill_climb_restarts, seen);
    take(j, "hill_climb_perturb", c.hill_climb_perturb, seen);
    take(j, "alpha", c.alpha, seen);
    take(j, "importance_trials", c.importance_trials, seen);
    take(j, "channel_ratio", c.channel_ratio, seen);
    take(j, "hidden", c.hidden, seen);
    take(j, "coder_epochs", c.coder_epochs, seen);
    take(j, "coder_lr", c.coder_lr, seen);
    take(j, "coder_batch", c.coder_batch, seen);
    take(j, "optimizer", c.optimizer, seen);
    take(j, "coder_train_rows", c.coder_train_rows, seen);
    take(j, "seed", c.seed, seen);
    if (auto g = j.find("generator"); g != j.end()) {
      seen.insert("generator");
      std::set<std::string> gseen;
      take(*g, "seed", c.generator.seed, gseen);
      take(*g, "max_parents", c.generator.max_parents, gseen);
      take(*g, "root_probability", c.generator.root_probability, gseen);
      take(*g, "dominant_mass", c.generator.dominant_mass, gseen);
      take(*g, "jitter", c.generator.jitter, gseen);
      take(*g, "center_spread", c.generator.center_spread, gseen);
      reject_unknown(*g, gseen, "generator.");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("config: ") + e.what());
  }
  reject_unknown(j, seen, "");
  c.validate();
  return c;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("config: ") + e.what());
  }
  return config_from(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Synthetic ground truth

GroundTruthSpec make_ground_truth(const FeatureSchema& schema, int clusters, const GeneratorConfig& gen) {
  const int num_f = schema.num_features();
  RandomNetworkOptions opts;
  opts.max_parents = gen.max_parents;
  opts.root_probability = gen.root_probability;
  opts.dominant_mass = gen.dominant_mass;
  const std::vector<int> cards(num_f, clusters);
  auto bn = random_network(cards, opts, derive_seed(gen.seed, 0));

  Rng rng(derive_seed(gen.seed, 1));
  std::vector<Codebook::Feature> features;
  for (int f = 0; f < num_f; ++f) {
    const int dim = schema.block_dim(f);
    // Rejection sampling toward well-separated centers; the separation target
    // shrinks if it cannot be met.
    double min_sep = gen.center_spread * std::min(0.5 * std::sqrt(static_cast<double>(dim)), 2.0 / clusters);
    std::vector<double> centers;
    int attempts = 0;
    while (static_cast<int>(centers.size()) < clusters * dim) {
      std::vector<double> c(dim);
      for (double& x : c) x = gen.center_spread * (2.0 * uniform01(rng) - 1.0);
      bool ok = true;
      for (std::size_t s = 0; s < centers.size(); s += dim) {
        if (squared_distance(c, std::span<const double>(centers).subspan(s, dim)) < min_sep * min_sep) {
          ok = false;
          break;
        }
      }
      if (ok) {
        centers.insert(centers.end(), c.begin(), c.end());
      } else if (++attempts % 1000 == 0) {
        min_sep *= 0.8;
      }
    }
    features.push_back({dim, std::move(centers), 0.0});
  }
  return {std::move(bn), Codebook(schema, std::move(features)), gen.jitter};
}

GroundTruthSpec default_ground_truth(const ExperimentConfig& config) {
  return make_ground_truth(config.schema(), config.clusters, config.generator);
}

Dataset gen_synthetic(const GroundTruthSpec& spec, int n, std::uint64_t seed,
                      std::vector<QuantizedLatent>* states) {
  if (n < 1) throw Error(Errc::invalid_argument, "sample count must be >= 1");
  if (!(spec.jitter >= 0.0)) throw Error(Errc::invalid_argument, "jitter must be >= 0");
  auto sampled = ancestral_sample(spec.generator, n, derive_seed(seed, 0));
  Rng rng(derive_seed(seed, 1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<LatentVector> rows;
  rows.reserve(n);
  for (const auto& q : sampled) {
    auto v = dequantize(q, spec.layout);
    if (spec.jitter > 0.0) {
      std::vector<double> flat(v.values().begin(), v.values().end());
      for (double& x : flat) x += spec.jitter * gauss(rng);
      v = LatentVector(spec.layout.schema(), std::move(flat));
    }
    rows.push_back(std::move(v));
  }
  if (states) *states = std::move(sampled);
  return Dataset(spec.layout.schema(), std::move(rows));
}

Dataset gen_synthetic(const GroundTruthSpec& spec, int n, std::uint64_t seed) {
  return gen_synthetic(spec, n, seed, nullptr);
}

// ---------------------------------------------------------------------------
// Training

namespace {

// reachable[c][s]: some subset of `dims` with c elements sums to s.
std::vector<std::vector<char>> subset_sums(const std::vector<int>& dims) {
  const int total = std::accumulate(dims.begin(), dims.end(), 0);
  std::vector<std::vector<char>> reach(dims.size() + 1, std::vector<char>(total + 1, 0));
  reach[0][0] = 1;
  for (std::size_t i = 0; i < dims.size(); ++i)
    for (std::size_t c = i + 1; c-- > 0;)
      for (int s = total - dims[i]; s >= 0; --s)
        if (reach[c][s]) reach[c + 1][s + dims[i]] = 1;
  return reach;
}

std::vector<int> negligible_of(int num_f, std::span<const int> retained) {
  std::vector<int> out;
  for (int f = 0; f < num_f; ++f)
    if (std::find(retained.begin(), retained.end(), f) == retained.end()) out.push_back(f);
  return out;
}

// Random subset of `pool` with the given element count and block-width sum.
std::optional<std::vector<int>> random_subset(const FeatureSchema& schema, std::vector<int> pool, int count,
                                              int width, Rng& rng) {
  for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i) std::swap(pool[i], pool[uniform_index(rng, i + 1)]);
  std::vector<int> chosen;
  // Depth-first search over the shuffled pool.
  std::function<bool(std::size_t, int, int)> dfs = [&](std::size_t i, int left, int w) -> bool {
    if (left == 0) return w == 0;
    if (i == pool.size() || w <= 0) return false;
    const int d = schema.block_dim(pool[i]);
    if (d <= w) {
      chosen.push_back(pool[i]);
      if (dfs(i + 1, left - 1, w - d)) return true;
      chosen.pop_back();
    }
    return dfs(i + 1, left, w);
  };
  if (!dfs(0, count, width)) return std::nullopt;
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<double> gather_payload(const FeatureSchema& schema, const LatentVector& v, std::span<const int> kept) {
  std::vector<double> p;
  p.reserve(schema.dims_of(kept));
  for (int f : kept) {
    auto b = v.block(schema, f);
    p.insert(p.end(), b.begin(), b.end());
  }
  return p;
}

}  // namespace

std::vector<int> supported_lengths(const FeatureSchema& schema, std::span<const int> retained, int max_discard) {
  const int num_f = schema.num_features();
  const auto negligible = negligible_of(num_f, retained);
  std::vector<int> dims;
  for (int f : negligible) dims.push_back(schema.block_dim(f));
  const auto reach = subset_sums(dims);
  const int base = schema.dims_of(retained);
  const int n_neg = static_cast<int>(negligible.size());
  std::set<int> lengths;
  for (int kept_neg = std::max(0, n_neg - max_discard); kept_neg <= n_neg; ++kept_neg)
    for (std::size_t s = 0; s < reach[kept_neg].size(); ++s)
      if (reach[kept_neg][s]) lengths.insert(base + static_cast<int>(s));
  return {lengths.begin(), lengths.end()};
}

void ModelBundle::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_argument, "bundle: " + msg); };
  const int num_f = schema.num_features();
  if (format_version != kBundleVersion) {
    throw Error(Errc::version_mismatch, "bundle format version " + std::to_string(format_version));
  }
  if (!(codebook.schema() == schema)) fail("codebook schema differs");
  if (network.num_nodes() != num_f) fail("network size differs from F");
  if (network.cardinalities() != codebook.cardinalities()) fail("network cardinalities differ from codebook");
  if (profile.num_features() != num_f) fail("importance profile size differs from F");
  profile.validate();
  if (!(config.schema() == schema)) fail("config schema differs");
  if (!(value_range > 0.0) || !std::isfinite(value_range)) fail("value range must be positive");
  const int max_discard = std::min(config.n_discard, num_f - static_cast<int>(profile.retained.size()));
  for (int m : supported_lengths(schema, profile.retained, max_discard)) {
    if (!coder.supports(m)) fail("no channel codec for payload length " + std::to_string(m));
  }
}

ModelBundle train_all(const ExperimentConfig& config, const Dataset& train_ds) {
  config.validate();
  ModelBundle b;
  b.config = config;
  b.schema = config.schema();
  if (!(train_ds.schema() == b.schema)) throw Error(Errc::schema_mismatch, "training data does not match config schema");
  const int num_f = b.schema.num_features();

  std::vector<QuantizedLatent> states;
  try {
    const std::vector<int> k(num_f, config.clusters);
    b.codebook = fit_minibatch_kmeans(train_ds, k, config.kmeans_batch, config.kmeans_epochs,
                                      stage_seed(config.seed, Stage::kmeans));
    states = quantize_all(train_ds, b.codebook);
  } catch (...) {
    rethrow_with_stage("quantizer");
  }

  try {
    const auto cards = b.codebook.cardinalities();
    const Dag dag = hill_climb(states, cards, config.max_parents, config.max_iters, stage_seed(config.seed, Stage::structure),
                               {config.hill_climb_restarts, config.hill_climb_perturb});
    b.network = mle_fit(dag, states, cards, config.alpha);
  } catch (...) {
    rethrow_with_stage("bayesnet");
  }

  try {
    auto importance = assess_importance(train_ds, b.codebook, config.importance_trials,
                                        stage_seed(config.seed, Stage::importance));
    b.profile = make_profile(std::move(importance), b.network, config.retained);
  } catch (...) {
    rethrow_with_stage("importance");
  }

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& row : train_ds.rows()) {
    for (double x : row.values()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  b.value_range = hi > lo ? hi - lo : 1.0;

  try {
    const auto lengths = supported_lengths(b.schema, b.profile.retained, config.n_discard);
    std::map<int, std::vector<std::vector<double>>> payloads;

    // Payloads come from the nested kept sets of one maximal compression per
    // sampled row.
    Rng pick(stage_seed(config.seed, Stage::payload_sampling));
    const std::size_t n_rows = std::min<std::size_t>(train_ds.size(), config.coder_train_rows);
    std::vector<std::size_t> rows(train_ds.size());
    std::iota(rows.begin(), rows.end(), 0);
    for (std::size_t i = 0; i < n_rows; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform01(pick) * static_cast<double>(rows.size() - i));
      std::swap(rows[i], rows[j]);
    }
    rows.resize(n_rows);

    CompressOptions copt;
    copt.n_discard = config.n_discard;
    copt.tau = config.tau;
    copt.single_shot = config.single_shot;
    for (std::size_t r : rows) {
      const auto& v = train_ds.row(r);
      std::vector<DiscardRound> trace;
      compress(b.network, b.codebook, v, b.profile, copt, &trace);
      std::vector<int> kept(num_f);
      std::iota(kept.begin(), kept.end(), 0);
      payloads[b.schema.total_dim()].push_back(gather_payload(b.schema, v, kept));
      for (const auto& round : trace) {
        if (round.discarded < 0) break;
        kept.erase(std::find(kept.begin(), kept.end(), round.discarded));
        auto p = gather_payload(b.schema, v, kept);
        payloads[static_cast<int>(p.size())].push_back(std::move(p));
      }
    }

    // Lengths no compression produced (possible with unequal block widths or
    // an early tau stop) get payloads from random feasible kept sets.
    const auto negligible = negligible_of(num_f, b.profile.retained);
    const int base = b.schema.dims_of(b.profile.retained);
    for (int m : lengths) {
      if (payloads.count(m)) continue;
      for (std::size_t r : rows) {
        for (int count = 0; count <= static_cast<int>(negligible.size()); ++count) {
          auto subset = random_subset(b.schema, negligible, count, m - base, pick);
          if (!subset) continue;
          std::vector<int> kept(b.profile.retained.begin(), b.profile.retained.end());
          kept.insert(kept.end(), subset->begin(), subset->end());
          std::sort(kept.begin(), kept.end());
          payloads[m].push_back(gather_payload(b.schema, train_ds.row(r), kept));
          break;
        }
      }
    }

    std::map<int, int> k_of;
    for (int m : lengths) k_of[m] = std::max(1, static_cast<int>(std::lround(config.channel_ratio * m)));
    std::optional<int> hidden;
    if (config.hidden > 0) hidden = config.hidden;
    auto coder = init_coder(lengths, k_of, hidden, stage_seed(config.seed, Stage::coder_init));

    TrainOptions topt;
    topt.snr_lo_db = config.train_snr_lo;
    topt.snr_hi_db = config.train_snr_hi;
    topt.epochs = config.coder_epochs;
    topt.lr = config.coder_lr;
    topt.batch = config.coder_batch;
    topt.optimizer = config.optimizer == "sgd" ? Optimizer::sgd : Optimizer::adam;
    topt.seed = stage_seed(config.seed, Stage::coder_train);
    std::map<int, std::vector<std::vector<double>>> used;
    for (int m : lengths) used[m] = std::move(payloads[m]);
    b.coder = train_coder(std::move(coder), used, topt);
  } catch (...) {
    rethrow_with_stage("channel");
  }

  b.validate();
  return b;
}

// ---------------------------------------------------------------------------
// Transmission

namespace {

struct Received {
  CompressedPacket packet;
  std::vector<DiscardRound> discard_rounds;
};

TransmitResult finish_transmit(const ModelBundle& bundle, const LatentVector& v, const CompressedPacket& packet,
                               std::vector<DiscardRound> discard_rounds, double snr_db, std::uint64_t seed,
                               bool random_decompress) {
  TransmitResult out;
  out.states_true = quantize(v, bundle.codebook);
  out.trace.packet = packet;
  out.trace.discard_rounds = std::move(discard_rounds);

  const int m = static_cast<int>(packet.payload.size());
  out.trace.channel = coder_forward(bundle.coder, m, packet.payload, ChannelConfig{snr_db, derive_seed(seed, 0)});

  CompressedPacket received = packet;
  received.payload = out.trace.channel.payload_hat;
  Decompressed d = random_decompress
                       ? decompress_random(bundle.codebook, received, derive_seed(seed, 1))
                       : decompress(bundle.network, bundle.codebook, received, &out.trace.recovery_rounds);
  out.v_hat = std::move(d.latent);
  out.states_hat = std::move(d.states);
  return out;
}

}  // namespace

TransmitResult transmit_one(const ModelBundle& bundle, const LatentVector& v, double snr_db, int n_discard,
                            std::uint64_t seed, const TransmitOptions& options) {
  CompressOptions copt;
  copt.n_discard = n_discard;
  copt.tau = options.tau;
  copt.single_shot = bundle.config.single_shot;
  std::vector<DiscardRound> rounds;
  const auto packet = compress(bundle.network, bundle.codebook, v, bundle.profile, copt, &rounds);
  return finish_transmit(bundle, v, packet, std::move(rounds), options.noiseless ? kNoiselessSnr : snr_db, seed,
                         options.random_decompress);
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t cell_index) {
  return derive_seed(stage_seed(seed, Stage::evaluation), cell_index);
}

std::uint64_t sample_seed(std::uint64_t cell, std::size_t sample_index) { return derive_seed(cell, sample_index); }

std::vector<EvalReport> evaluate_grid(const ModelBundle& bundle, const Dataset& test_ds,
                                      std::span<const double> snr_list, std::span<const int> n_discard_list,
                                      std::uint64_t seed, const EvalOptions& options) {
  if (!(test_ds.schema() == bundle.schema)) throw Error(Errc::schema_mismatch, "test data does not match bundle schema");
  const std::size_t n = test_ds.size();

  // Compression does not depend on the channel, so each (row, n_discard)
  // packet is built once and shared by every SNR cell.
  std::vector<std::vector<CompressedPacket>> packets(n_discard_list.size(), std::vector<CompressedPacket>(n));
  for (std::size_t d = 0; d < n_discard_list.size(); ++d) {
    CompressOptions copt;
    copt.n_discard = n_discard_list[d];
    copt.tau = bundle.config.tau;
    copt.single_shot = bundle.config.single_shot;
    for (std::size_t i = 0; i < n; ++i)
      packets[d][i] = compress(bundle.network, bundle.codebook, test_ds.row(i), bundle.profile, copt);
  }
  std::vector<QuantizedLatent> truth = quantize_all(test_ds, bundle.codebook);

  const std::size_t n_cells = snr_list.size() * n_discard_list.size();
  const int rows_per_cell = options.random_control ? 2 : 1;
  std::vector<EvalReport> reports(n_cells * rows_per_cell);

  auto run_cell = [&](std::size_t c) {
    const double snr = snr_list[c / n_discard_list.size()];
    const std::size_t d = c % n_discard_list.size();
    const std::uint64_t cs = cell_seed(seed, c);
    for (int variant = 0; variant < rows_per_cell; ++variant) {
      const bool random = variant == 1;
      double mse_sum = 0.0;
      std::int64_t symbols = 0;
      std::vector<QuantizedLatent> recovered(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& v = test_ds.row(i);
        auto r = finish_transmit(bundle, v, packets[d][i], {}, snr, sample_seed(cs, i), random);
        mse_sum += mse(v.values(), r.v_hat.values());
        symbols += static_cast<std::int64_t>(r.trace.channel.x_sent.size());
        recovered[i] = std::move(r.states_hat);
      }
      EvalReport rep;
      rep.snr_db = snr;
      rep.n_discard = n_discard_list[d];
      rep.method = random ? "random" : "pgm";
      rep.n_samples = static_cast<std::int64_t>(n);
      rep.mse = mse_sum / static_cast<double>(n);
      rep.psnr_db = psnr_from_mse(rep.mse, bundle.value_range);
      rep.state_accuracy = state_accuracy(truth, recovered);
      rep.ratio = compression_ratio(symbols, static_cast<std::int64_t>(n) * bundle.schema.total_dim());
      reports[c * rows_per_cell + variant] = std::move(rep);
    }
  };

  unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n_cells, 1)));
  if (threads <= 1) {
    for (std::size_t c = 0; c < n_cells; ++c) run_cell(c);
    return reports;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t c = next++; c < n_cells; c = next++) {
          try {
            run_cell(c);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return reports;
}

}  // namespace pgmsc
