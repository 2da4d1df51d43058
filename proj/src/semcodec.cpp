#include "pgmsc/semcodec.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "pgmsc/detail/byteio.hpp"
#include "pgmsc/error.hpp"
#include "pgmsc/random.hpp"

namespace pgmsc {

std::vector<double> assess_importance(const Dataset& ds, const Codebook& cb, int trials,
                                      std::uint64_t seed) {
  if (trials < 1) throw Error(Errc::invalid_argument, "trials must be >= 1");
  const auto& schema = ds.schema();
  if (!(schema == cb.schema())) throw Error(Errc::schema_mismatch, "dataset and codebook schemas differ");
  const int num_f = schema.num_features();
  const double total_dim = schema.total_dim();

  std::vector<double> sum(num_f, 0.0);
  Rng rng(seed);
  for (const auto& row : ds.rows()) {
    const auto q = quantize(row, cb);
    for (int t = 0; t < trials; ++t) {
      const double u = uniform01(rng);
      for (int f = 0; f < num_f; ++f) {
        // Pick uniformly among the K_f - 1 centers other than the assigned one.
        int alt = static_cast<int>(u * (cb.cardinality(f) - 1));
        if (alt >= q.states[f]) ++alt;
        sum[f] += squared_distance(cb.center(f, alt), row.block(schema, f)) / total_dim;
      }
    }
  }
  const double count = static_cast<double>(ds.size()) * trials;
  for (double& s : sum) s /= count;
  return sum;
}

std::vector<int> select_retained(std::span<const double> importance, const BayesianNetwork& bn,
                                 int r) {
  const int num_f = static_cast<int>(importance.size());
  if (bn.num_nodes() != num_f) throw Error(Errc::invalid_argument, "importance/network size mismatch");
  if (r < 1 || r >= num_f) {
    throw Error(Errc::invalid_argument, "retained count must lie in [1, F)");
  }
  std::vector<char> isolated(num_f, 0);
  std::vector<char> has_child(num_f, 0);
  for (const auto& e : bn.dag().edges()) has_child[e.parent] = 1;
  int n_isolated = 0;
  for (int f = 0; f < num_f; ++f) {
    isolated[f] = bn.dag().parents(f).empty() && !has_child[f];
    n_isolated += isolated[f];
  }
  if (n_isolated > r) {
    throw Error(Errc::infeasible_retention, std::to_string(n_isolated) +
                                                " isolated features cannot fit in a retained set of " +
                                                std::to_string(r));
  }
  std::vector<int> ranked(num_f);
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](int a, int b) { return importance[a] > importance[b]; });

  std::vector<int> retained;
  for (int f = 0; f < num_f; ++f)
    if (isolated[f]) retained.push_back(f);
  for (int f : ranked) {
    if (static_cast<int>(retained.size()) == r) break;
    if (!isolated[f]) retained.push_back(f);
  }
  std::sort(retained.begin(), retained.end());
  return retained;
}

std::vector<std::optional<double>> build_weights(std::span<const double> importance,
                                                 std::span<const int> retained, double eps) {
  const int num_f = static_cast<int>(importance.size());
  std::vector<std::optional<double>> w(num_f);
  double max_inv = 0.0;
  for (int f = 0; f < num_f; ++f) {
    if (std::find(retained.begin(), retained.end(), f) != retained.end()) continue;
    w[f] = 1.0 / (importance[f] + eps);
    max_inv = std::max(max_inv, *w[f]);
  }
  for (auto& x : w)
    if (x) *x /= max_inv;
  return w;
}

bool ImportanceProfile::is_retained(int f) const {
  return std::binary_search(retained.begin(), retained.end(), f);
}

void ImportanceProfile::validate() const {
  const int num_f = num_features();
  if (retained.empty() || static_cast<int>(retained.size()) >= num_f) {
    throw Error(Errc::invalid_argument, "retained set size must lie in [1, F)");
  }
  if (!std::is_sorted(retained.begin(), retained.end()) ||
      std::adjacent_find(retained.begin(), retained.end()) != retained.end() ||
      retained.front() < 0 || retained.back() >= num_f) {
    throw Error(Errc::invalid_argument, "retained set must be sorted, unique and in range");
  }
  if (static_cast<int>(weights.size()) != num_f) {
    throw Error(Errc::invalid_argument, "weight vector must have one slot per feature");
  }
  for (int f = 0; f < num_f; ++f) {
    const bool r = is_retained(f);
    if (r == weights[f].has_value() || (!r && !(*weights[f] > 0.0))) {
      throw Error(Errc::invalid_argument, "weights must be positive exactly outside the retained set");
    }
  }
}

ImportanceProfile make_profile(std::vector<double> importance, const BayesianNetwork& bn, int r) {
  ImportanceProfile p;
  p.retained = select_retained(importance, bn, r);
  p.weights = build_weights(importance, p.retained);
  p.importance = std::move(importance);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Packet

std::vector<int> CompressedPacket::missing() const {
  std::vector<int> out;
  for (int f = 0; f < total_features; ++f)
    if (!std::binary_search(kept_indices.begin(), kept_indices.end(), f)) out.push_back(f);
  return out;
}

void validate_packet(const CompressedPacket& packet, const FeatureSchema& schema) {
  if (packet.schema_hash != schema.hash() || packet.total_features != schema.num_features()) {
    throw Error(Errc::schema_mismatch, "packet was produced for a different schema");
  }
  const auto& kl = packet.kept_indices;
  if (kl.size() != packet.kept_states.size()) {
    throw Error(Errc::invalid_argument, "packet KL and state counts differ");
  }
  for (std::size_t i = 0; i < kl.size(); ++i) {
    if (kl[i] < 0 || kl[i] >= packet.total_features || (i > 0 && kl[i] <= kl[i - 1])) {
      throw Error(Errc::invalid_argument, "packet KL must be sorted, unique and in range");
    }
  }
  if (static_cast<int>(packet.payload.size()) != schema.dims_of(kl)) {
    throw Error(Errc::invalid_argument, "packet payload length does not match KL");
  }
}

std::vector<std::uint8_t> encode_packet(const CompressedPacket& packet) {
  detail::ByteWriter w;
  w.put(static_cast<std::uint32_t>(packet.total_features));
  w.put(static_cast<std::uint32_t>(packet.kept_indices.size()));
  w.put(packet.schema_hash);
  for (int i : packet.kept_indices) w.put(static_cast<std::uint32_t>(i));
  for (int s : packet.kept_states) w.put(static_cast<std::uint32_t>(s));
  for (double x : packet.payload) w.put_f64(x);
  return std::move(w.bytes());
}

CompressedPacket decode_packet(std::span<const std::uint8_t> bytes, const FeatureSchema& schema) {
  detail::ByteReader r(bytes);
  CompressedPacket p;
  p.total_features = static_cast<int>(r.get<std::uint32_t>());
  const auto n_kept = r.get<std::uint32_t>();
  p.schema_hash = r.get<std::uint64_t>();
  if (p.schema_hash != schema.hash()) {
    throw Error(Errc::schema_mismatch, "packet was produced for a different schema");
  }
  if (n_kept > static_cast<std::uint32_t>(schema.num_features())) {
    throw Error(Errc::corrupt, "packet claims more kept features than the schema has");
  }
  for (std::uint32_t i = 0; i < n_kept; ++i) p.kept_indices.push_back(static_cast<int>(r.get<std::uint32_t>()));
  for (std::uint32_t i = 0; i < n_kept; ++i) p.kept_states.push_back(static_cast<int>(r.get<std::uint32_t>()));
  for (int f : p.kept_indices) {
    if (f < 0 || f >= schema.num_features()) throw Error(Errc::corrupt, "packet KL index out of range");
  }
  const int m = schema.dims_of(p.kept_indices);
  for (int i = 0; i < m; ++i) p.payload.push_back(r.get_f64());
  if (r.remaining() != 0) throw Error(Errc::corrupt, "trailing bytes after packet");
  validate_packet(p, schema);
  return p;
}

// ---------------------------------------------------------------------------
// Compression

namespace {

Evidence evidence_from(const std::vector<int>& nodes, const QuantizedLatent& q) {
  Evidence ev;
  for (int f : nodes) ev.emplace_hint(ev.end(), f, q.states[f]);
  return ev;
}

}  // namespace

CompressedPacket compress(const BayesianNetwork& bn, const Codebook& cb, const LatentVector& v,
                          const ImportanceProfile& profile, const CompressOptions& options,
                          std::vector<DiscardRound>* trace) {
  const auto& schema = cb.schema();
  const int num_f = schema.num_features();
  if (bn.num_nodes() != num_f || profile.num_features() != num_f) {
    throw Error(Errc::invalid_argument, "network, codebook and profile disagree on F");
  }
  const int n_negligible = num_f - static_cast<int>(profile.retained.size());
  if (options.n_discard < 0 || options.n_discard > n_negligible) {
    throw Error(Errc::invalid_argument, "n_discard must lie in [0, " + std::to_string(n_negligible) + "]");
  }
  const auto q = quantize(v, cb);
  std::vector<int> kept(num_f);
  std::iota(kept.begin(), kept.end(), 0);
  if (trace) trace->clear();

  auto score = [&](int i) {
    Evidence ev = evidence_from(kept, q);
    ev.erase(i);
    return prob_of_state(bn, ev, i, q.states[i]);
  };
  auto candidates = [&] {
    std::vector<int> c;
    for (int f : kept)
      if (!profile.is_retained(f)) c.push_back(f);
    return c;
  };

  if (options.single_shot) {
    const auto cand = candidates();
    std::vector<double> p(cand.size()), wp(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) {
      p[i] = score(cand[i]);
      wp[i] = *profile.weights[cand[i]] * p[i];
    }
    std::vector<std::size_t> order(cand.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return wp[a] > wp[b] + kTieTolerance; });
    for (int round = 0; round < options.n_discard; ++round) {
      const std::size_t pick = order[round];
      DiscardRound rec{cand, p, -1, wp[pick]};
      if (wp[pick] >= options.tau) {
        rec.discarded = cand[pick];
        kept.erase(std::find(kept.begin(), kept.end(), cand[pick]));
      }
      if (trace) trace->push_back(rec);
      if (rec.discarded < 0) break;
    }
  } else {
    for (int round = 0; round < options.n_discard; ++round) {
      DiscardRound rec;
      rec.candidates = candidates();
      std::vector<double> wp;
      for (int i : rec.candidates) {
        rec.probabilities.push_back(score(i));
        wp.push_back(*profile.weights[i] * rec.probabilities.back());
      }
      const int best = argmax_with_ties(wp);
      rec.weighted = wp[best];
      if (wp[best] >= options.tau) {
        rec.discarded = rec.candidates[best];
        kept.erase(std::find(kept.begin(), kept.end(), rec.discarded));
      }
      const bool stop = rec.discarded < 0;
      if (trace) trace->push_back(std::move(rec));
      if (stop) break;
    }
  }

  CompressedPacket packet;
  packet.total_features = num_f;
  packet.schema_hash = schema.hash();
  packet.kept_indices = kept;
  for (int f : kept) {
    packet.kept_states.push_back(q.states[f]);
    auto b = v.block(schema, f);
    packet.payload.insert(packet.payload.end(), b.begin(), b.end());
  }
  return packet;
}

namespace {

Decompressed assemble(const Codebook& cb, const CompressedPacket& packet, QuantizedLatent states) {
  const auto& schema = cb.schema();
  std::vector<double> flat(schema.total_dim());
  std::vector<char> kept(schema.num_features(), 0);
  std::size_t cursor = 0;
  for (int f : packet.kept_indices) {
    kept[f] = 1;
    const int d = schema.block_dim(f);
    std::copy_n(packet.payload.begin() + cursor, d, flat.begin() + schema.offset(f));
    cursor += d;
  }
  for (int f = 0; f < schema.num_features(); ++f) {
    if (kept[f]) continue;
    auto c = cb.center(f, states.states[f]);
    std::copy(c.begin(), c.end(), flat.begin() + schema.offset(f));
  }
  return {std::move(states), LatentVector(schema, std::move(flat))};
}

}  // namespace

Decompressed decompress(const BayesianNetwork& bn, const Codebook& cb, const CompressedPacket& packet,
                        std::vector<RecoveryRound>* trace) {
  validate_packet(packet, cb.schema());
  const auto cards = cb.cardinalities();
  for (std::size_t i = 0; i < packet.kept_indices.size(); ++i) {
    const int f = packet.kept_indices[i];
    if (packet.kept_states[i] < 0 || packet.kept_states[i] >= cards[f]) {
      throw Error(Errc::invalid_argument, "packet state out of range for feature " + std::to_string(f));
    }
  }
  if (trace) trace->clear();

  QuantizedLatent states{std::vector<int>(packet.total_features, 0)};
  Evidence evidence;
  for (std::size_t i = 0; i < packet.kept_indices.size(); ++i) {
    states.states[packet.kept_indices[i]] = packet.kept_states[i];
    evidence.emplace(packet.kept_indices[i], packet.kept_states[i]);
  }
  auto missing = packet.missing();
  while (!missing.empty()) {
    RecoveryRound rec;
    rec.candidates = missing;
    std::vector<double> conf;
    for (int j : missing) {
      rec.map.push_back(map_state(bn, evidence, j));
      conf.push_back(rec.map.back().probability);
    }
    const int best = argmax_with_ties(conf);
    const int node = missing[best];
    rec.committed = node;
    states.states[node] = rec.map[best].state;
    evidence.emplace(node, rec.map[best].state);
    missing.erase(missing.begin() + best);
    if (trace) trace->push_back(std::move(rec));
  }
  return assemble(cb, packet, std::move(states));
}

Decompressed decompress_random(const Codebook& cb, const CompressedPacket& packet,
                               std::uint64_t seed) {
  validate_packet(packet, cb.schema());
  QuantizedLatent states{std::vector<int>(packet.total_features, 0)};
  for (std::size_t i = 0; i < packet.kept_indices.size(); ++i)
    states.states[packet.kept_indices[i]] = packet.kept_states[i];
  Rng rng(seed);
  for (int f : packet.missing()) states.states[f] = uniform_index(rng, cb.cardinality(f));
  return assemble(cb, packet, std::move(states));
}

}  // namespace pgmsc
