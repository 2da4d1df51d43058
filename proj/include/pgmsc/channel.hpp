#ifndef PGMSC_CHANNEL_HPP_
#define PGMSC_CHANNEL_HPP_

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pgmsc {

// Pass as snr_db to disable noise entirely.
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

struct ChannelConfig {
  double snr_db = kNoiselessSnr;
  std::uint64_t seed = 0;

  bool noiseless() const { return snr_db == kNoiselessSnr; }
};

// Noise variance under unit average signal power: 10^(-snr_db / 10).
double snr_to_sigma2(double snr_db);

struct PowerNormalized {
  std::vector<double> x;
  double scale = 1.0;  // RMS of the input, so input = scale * x
};

PowerNormalized power_normalize(std::span<const double> x);

// y = x + n, n ~ N(0, sigma^2) i.i.d., seeded by cfg.seed.
std::vector<double> awgn(std::span<const double> x, const ChannelConfig& cfg);

// Fully connected layer, weight stored row-major (out x in).
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  std::vector<double> forward(std::span<const double> x) const;
  bool operator==(const DenseLayer&) const = default;
};

enum class CoderArch { affine, hidden_tanh };

const char* arch_name(CoderArch arch);
CoderArch parse_arch(const std::string& name);

// Encoder/decoder for one payload length m. Affine: one dense layer each
// side. hidden_tanh: dense -> tanh -> dense on each side.
struct CodecPair {
  int m = 0;
  int k = 0;
  CoderArch arch = CoderArch::affine;
  int hidden = 0;
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;

  std::vector<double> encode(std::span<const double> payload) const;
  std::vector<double> decode(std::span<const double> symbols) const;
  std::size_t num_params() const;
  bool operator==(const CodecPair&) const = default;
};

struct TrainingRecord {
  int epochs = 0;
  double lr = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;

  bool operator==(const TrainingRecord&) const = default;
};

class ChannelCoder {
 public:
  ChannelCoder() = default;
  explicit ChannelCoder(std::map<int, CodecPair> pairs);

  bool supports(int m) const { return pairs_.count(m) != 0; }
  const CodecPair& pair(int m) const;
  CodecPair& pair(int m);
  std::vector<int> lengths() const;
  const std::map<int, CodecPair>& pairs() const { return pairs_; }

  // Per-length training history; empty until train_coder has run.
  std::map<int, TrainingRecord>& records() { return records_; }
  const std::map<int, TrainingRecord>& records() const { return records_; }

  bool operator==(const ChannelCoder&) const = default;

 private:
  std::map<int, CodecPair> pairs_;
  std::map<int, TrainingRecord> records_;
};

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) for every weight and bias.
ChannelCoder init_coder(std::span<const int> lengths, const std::map<int, int>& k_of,
                        std::optional<int> hidden, std::uint64_t seed);

// k = m, identity encoder and decoder, zero biases.
ChannelCoder identity_coder(std::span<const int> lengths);

struct ForwardResult {
  std::vector<double> x_sent;
  std::vector<double> y_received;
  std::vector<double> payload_hat;
  double scale = 1.0;  // carried losslessly beside the payload
};

// payload -> encode -> power normalize -> AWGN -> decode -> rescale.
ForwardResult coder_forward(const ChannelCoder& coder, int m, std::span<const double> payload,
                            const ChannelConfig& cfg);

// ---------------------------------------------------------------------------
// Training

std::vector<double> flatten_params(const CodecPair& pair);
void assign_params(CodecPair& pair, std::span<const double> flat);

struct LossGradient {
  double loss = 0.0;             // mean over the batch of ||p - p_hat||^2 / m
  std::vector<double> gradient;  // same layout as flatten_params
};

// Exact gradient by backpropagation for a batch with fixed noise vectors.
LossGradient loss_and_gradient(const CodecPair& pair, std::span<const std::vector<double>> payloads,
                               std::span<const std::vector<double>> noise);

enum class Optimizer { sgd, adam };

struct TrainOptions {
  double snr_lo_db = -5.0;
  double snr_hi_db = 5.0;
  bool noiseless = false;
  int epochs = 100;
  double lr = 1e-2;
  int batch = 32;
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t seed = 0;
};

// Mini-batch training, one SNR draw per batch, lengths visited round-robin.
// Throws Errc::divergence on a non-finite loss.
ChannelCoder train_coder(ChannelCoder coder, const std::map<int, std::vector<std::vector<double>>>& payloads,
                         const TrainOptions& options);

}  // namespace pgmsc

#endif  // PGMSC_CHANNEL_HPP_
