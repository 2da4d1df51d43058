#ifndef PGMSC_SEMCODEC_HPP_
#define PGMSC_SEMCODEC_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pgmsc/bayesnet.hpp"
#include "pgmsc/inference.hpp"
#include "pgmsc/latent.hpp"
#include "pgmsc/quantizer.hpp"

namespace pgmsc {

// Mean latent-space squared error (per latent dimension) when feature f is
// swapped for a uniformly random different cluster center. One uniform draw
// per (row, trial) is shared by all features, which keeps the result
// invariant under a permutation of the feature order.
std::vector<double> assess_importance(const Dataset& ds, const Codebook& cb, int trials,
                                      std::uint64_t seed);

// Top-r features by importance (ties to the lower index), with every node
// that has neither parents nor children forced in first. Result is sorted.
std::vector<int> select_retained(std::span<const double> importance, const BayesianNetwork& bn,
                                 int r);

// w_f = (1 / (imp_f + eps)) / max_g (1 / (imp_g + eps)) over f outside R;
// retained features get no weight.
std::vector<std::optional<double>> build_weights(std::span<const double> importance,
                                                 std::span<const int> retained, double eps = 1e-6);

struct ImportanceProfile {
  std::vector<double> importance;
  std::vector<int> retained;
  std::vector<std::optional<double>> weights;

  int num_features() const { return static_cast<int>(importance.size()); }
  bool is_retained(int f) const;
  // Throws unless |R| in [1, F) and weights exist exactly outside R.
  void validate() const;

  bool operator==(const ImportanceProfile&) const = default;
};

ImportanceProfile make_profile(std::vector<double> importance, const BayesianNetwork& bn, int r);

// What the transmitter emits: KL, the continuous blocks of the kept features
// (L'), and their quantized states. KL and states travel over the lossless side
// channel; only the payload is exposed to channel noise.
struct CompressedPacket {
  std::vector<int> kept_indices;
  std::vector<int> kept_states;
  std::vector<double> payload;
  int total_features = 0;
  std::uint64_t schema_hash = 0;

  int num_kept() const { return static_cast<int>(kept_indices.size()); }
  std::vector<int> missing() const;
  bool operator==(const CompressedPacket&) const = default;
};

// Throws if the packet disagrees with the schema (hash, F, sorted KL, payload
// length).
void validate_packet(const CompressedPacket& packet, const FeatureSchema& schema);

// Little-endian wire form: u32 F, u32 |KL|, u64 schema hash, |KL| x u32
// indices, |KL| x u32 states, payload as f64.
std::vector<std::uint8_t> encode_packet(const CompressedPacket& packet);
CompressedPacket decode_packet(std::span<const std::uint8_t> bytes, const FeatureSchema& schema);

struct CompressOptions {
  int n_discard = 0;
  double tau = 0.0;
  // Score every candidate once against the full evidence instead of
  // re-running inference after each discard.
  bool single_shot = false;
};

struct DiscardRound {
  std::vector<int> candidates;
  std::vector<double> probabilities;  // p_i per candidate
  int discarded = -1;                 // -1 when the round stopped on tau
  double weighted = 0.0;              // w_i * p_i of the winner
};

CompressedPacket compress(const BayesianNetwork& bn, const Codebook& cb, const LatentVector& v,
                          const ImportanceProfile& profile, const CompressOptions& options,
                          std::vector<DiscardRound>* trace = nullptr);

struct RecoveryRound {
  std::vector<int> candidates;
  std::vector<MapResult> map;  // per candidate
  int committed = -1;
};

struct Decompressed {
  QuantizedLatent states;
  LatentVector latent;
};

// Greedy MAP recovery: commit the missing node with the most confident MAP
// state, add it to the evidence, repeat. Recovered blocks are cluster centers.
Decompressed decompress(const BayesianNetwork& bn, const Codebook& cb, const CompressedPacket& packet,
                        std::vector<RecoveryRound>* trace = nullptr);

// Control decoder: missing features get uniformly random cluster centers.
Decompressed decompress_random(const Codebook& cb, const CompressedPacket& packet,
                               std::uint64_t seed);

}  // namespace pgmsc

#endif  // PGMSC_SEMCODEC_HPP_
