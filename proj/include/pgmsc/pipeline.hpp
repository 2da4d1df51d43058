#ifndef PGMSC_PIPELINE_HPP_
#define PGMSC_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgmsc/bayesnet.hpp"
#include "pgmsc/channel.hpp"
#include "pgmsc/latent.hpp"
#include "pgmsc/metrics.hpp"
#include "pgmsc/quantizer.hpp"
#include "pgmsc/semcodec.hpp"

namespace pgmsc {

// Stage counters for derive_seed(master, stage).
enum class Stage : std::uint64_t {
  kmeans = 1,
  importance = 2,
  coder_init = 3,
  coder_train = 4,
  payload_sampling = 5,
  evaluation = 6,
  generator = 7,
  structure = 8,
};

std::uint64_t stage_seed(std::uint64_t master, Stage stage);

struct GeneratorConfig {
  std::uint64_t seed = 7;
  int max_parents = 2;
  double root_probability = 0.15;
  double dominant_mass = 0.85;
  double jitter = 0.05;
  double center_spread = 1.0;  // centers drawn from [-spread, spread]^d

  bool operator==(const GeneratorConfig&) const = default;
};

struct ExperimentConfig {
  std::vector<int> block_dims = std::vector<int>(12, 4);
  int clusters = 8;
  int kmeans_batch = 256;
  int kmeans_epochs = 10;
  int retained = 6;
  int n_discard = 6;
  double tau = 0.0;
  bool single_shot = false;
  std::vector<double> snr_grid = {-5, -3, -1, 1, 3, 5};
  double train_snr_lo = -5.0;
  double train_snr_hi = 5.0;
  int max_parents = 3;
  int max_iters = 1000;
  int hill_climb_restarts = 200;
  int hill_climb_perturb = 8;
  double alpha = 1.0;
  int importance_trials = 4;
  double channel_ratio = 1.0;  // k_m = max(1, round(channel_ratio * m))
  int hidden = 0;              // 0 selects the affine coder
  int coder_epochs = 60;
  double coder_lr = 3e-3;
  int coder_batch = 32;
  std::string optimizer = "adam";
  int coder_train_rows = 256;
  std::uint64_t seed = 2024;
  GeneratorConfig generator;

  FeatureSchema schema() const { return FeatureSchema(block_dims); }
  // Throws invalid_argument on the first violated constraint.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

std::string config_to_json(const ExperimentConfig& config);
// Keys absent from the JSON keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Ground truth for synthetic experiments: a generator network plus one
// center per (feature, state). Samples sit at their state's center plus
// isotropic Gaussian jitter.
struct GroundTruthSpec {
  BayesianNetwork generator;
  Codebook layout;
  double jitter = 0.0;
};

GroundTruthSpec make_ground_truth(const FeatureSchema& schema, int clusters, const GeneratorConfig& gen);
GroundTruthSpec default_ground_truth(const ExperimentConfig& config);

Dataset gen_synthetic(const GroundTruthSpec& spec, int n, std::uint64_t seed);
// Same draw as gen_synthetic, also returning the generator states.
Dataset gen_synthetic(const GroundTruthSpec& spec, int n, std::uint64_t seed,
                      std::vector<QuantizedLatent>* states);

inline constexpr std::uint32_t kBundleVersion = 1;

struct ModelBundle {
  FeatureSchema schema;
  Codebook codebook;
  BayesianNetwork network;
  ImportanceProfile profile;
  ChannelCoder coder;
  ExperimentConfig config;
  double value_range = 1.0;  // PSNR peak value: max - min over training entries
  std::uint32_t format_version = kBundleVersion;

  // Cross-checks cardinalities, F, profile and that every payload length a
  // packet with F - n_discard .. F kept features can have is supported.
  void validate() const;
  bool operator==(const ModelBundle&) const = default;
};

// Payload lengths reachable by kept sets that contain `retained` and keep
// between F - max_discard and F features.
std::vector<int> supported_lengths(const FeatureSchema& schema, std::span<const int> retained,
                                   int max_discard);

ModelBundle train_all(const ExperimentConfig& config, const Dataset& train_ds);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(std::span<const std::uint8_t> bytes);

struct TransmitOptions {
  bool random_decompress = false;
  bool noiseless = false;
  double tau = 0.0;
};

struct TransmitTrace {
  CompressedPacket packet;  // as sent, with the clean payload
  ForwardResult channel;
  std::vector<DiscardRound> discard_rounds;
  std::vector<RecoveryRound> recovery_rounds;
};

struct TransmitResult {
  LatentVector v_hat;
  QuantizedLatent states_true;
  QuantizedLatent states_hat;
  TransmitTrace trace;
};

// Channel noise is seeded by derive_seed(seed, 0); random decompression by
// derive_seed(seed, 1).
TransmitResult transmit_one(const ModelBundle& bundle, const LatentVector& v, double snr_db,
                            int n_discard, std::uint64_t seed, const TransmitOptions& options = {});

struct EvalOptions {
  bool random_control = true;
  int threads = 0;  // 0: hardware concurrency
};

std::uint64_t cell_seed(std::uint64_t seed, std::size_t cell_index);
std::uint64_t sample_seed(std::uint64_t cell, std::size_t sample_index);

// Cells are ordered snr-major, then n_discard. Each cell yields a "pgm" row,
// followed by a "random" control row when enabled.
std::vector<EvalReport> evaluate_grid(const ModelBundle& bundle, const Dataset& test_ds,
                                      std::span<const double> snr_list, std::span<const int> n_discard_list,
                                      std::uint64_t seed, const EvalOptions& options = {});

}  // namespace pgmsc

#endif  // PGMSC_PIPELINE_HPP_
