#include "pgmsc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "pgmsc/error.hpp"
#include "pgmsc/random.hpp"

namespace pgmsc {

double snr_to_sigma2(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

PowerNormalized power_normalize(std::span<const double> x) {
  double energy = 0.0;
  for (double v : x) energy += v * v;
  if (x.empty() || !(energy > 0.0)) {
    throw Error(Errc::degenerate_power, "cannot normalize a zero-power block");
  }
  PowerNormalized out;
  out.scale = std::sqrt(energy / static_cast<double>(x.size()));
  out.x.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.x[i] = x[i] / out.scale;
  return out;
}

std::vector<double> awgn(std::span<const double> x, const ChannelConfig& cfg) {
  std::vector<double> y(x.begin(), x.end());
  if (cfg.noiseless()) return y;
  Rng rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(snr_to_sigma2(cfg.snr_db)));
  for (double& v : y) v += noise(rng);
  return y;
}

std::vector<double> DenseLayer::forward(std::span<const double> x) const {
  std::vector<double> y(bias);
  for (int o = 0; o < out; ++o) {
    const double* w = weight.data() + static_cast<std::size_t>(o) * in;
    double acc = 0.0;
    for (int i = 0; i < in; ++i) acc += w[i] * x[i];
    y[o] += acc;
  }
  return y;
}

const char* arch_name(CoderArch arch) {
  return arch == CoderArch::affine ? "affine" : "hidden_tanh";
}

CoderArch parse_arch(const std::string& name) {
  if (name == "affine") return CoderArch::affine;
  if (name == "hidden_tanh") return CoderArch::hidden_tanh;
  throw Error(Errc::invalid_argument, "unknown coder architecture '" + name + "'");
}

namespace {

std::vector<double> run_stack(const std::vector<DenseLayer>& layers, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    a = layers[l].forward(a);
    if (l + 1 < layers.size())
      for (double& v : a) v = std::tanh(v);
  }
  return a;
}

}  // namespace

std::vector<double> CodecPair::encode(std::span<const double> payload) const {
  return run_stack(encoder, payload);
}

std::vector<double> CodecPair::decode(std::span<const double> symbols) const {
  return run_stack(decoder, symbols);
}

std::size_t CodecPair::num_params() const {
  std::size_t n = 0;
  for (const auto* stack : {&encoder, &decoder})
    for (const auto& l : *stack) n += l.weight.size() + l.bias.size();
  return n;
}

ChannelCoder::ChannelCoder(std::map<int, CodecPair> pairs) : pairs_(std::move(pairs)) {
  for (const auto& [m, p] : pairs_) {
    if (p.m != m || m < 1 || p.k < 1) throw Error(Errc::invalid_argument, "invalid codec dimensions");
    auto check_params = [](const std::vector<DenseLayer>& stack) {
      for (const auto& l : stack) {
        if (l.weight.size() != static_cast<std::size_t>(l.in) * l.out ||
            l.bias.size() != static_cast<std::size_t>(l.out)) {
          throw Error(Errc::invalid_argument, "dense layer has inconsistent shapes");
        }
        for (double w : l.weight)
          if (!std::isfinite(w)) throw Error(Errc::invalid_argument, "non-finite coder parameter");
        for (double b : l.bias)
          if (!std::isfinite(b)) throw Error(Errc::invalid_argument, "non-finite coder parameter");
      }
    };
    check_params(p.encoder);
    check_params(p.decoder);
    if (p.encoder.empty() || p.decoder.empty() || p.encoder.front().in != m ||
        p.encoder.back().out != p.k || p.decoder.front().in != p.k || p.decoder.back().out != m) {
      throw Error(Errc::invalid_argument, "codec layers do not chain m -> k -> m");
    }
  }
}

const CodecPair& ChannelCoder::pair(int m) const {
  auto it = pairs_.find(m);
  if (it == pairs_.end()) {
    throw Error(Errc::unsupported_length, "no channel codec for payload length " + std::to_string(m));
  }
  return it->second;
}

CodecPair& ChannelCoder::pair(int m) {
  return const_cast<CodecPair&>(static_cast<const ChannelCoder&>(*this).pair(m));
}

std::vector<int> ChannelCoder::lengths() const {
  std::vector<int> out;
  for (const auto& [m, p] : pairs_) out.push_back(m);
  return out;
}

namespace {

DenseLayer random_layer(int in, int out, Rng& rng) {
  DenseLayer l{in, out, std::vector<double>(static_cast<std::size_t>(in) * out), std::vector<double>(out)};
  const double bound = std::sqrt(1.0 / in);
  for (double& w : l.weight) w = (2.0 * uniform01(rng) - 1.0) * bound;
  for (double& b : l.bias) b = (2.0 * uniform01(rng) - 1.0) * bound;
  return l;
}

DenseLayer identity_layer(int n) {
  DenseLayer l{n, n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0), std::vector<double>(n, 0.0)};
  for (int i = 0; i < n; ++i) l.weight[static_cast<std::size_t>(i) * n + i] = 1.0;
  return l;
}

}  // namespace

ChannelCoder init_coder(std::span<const int> lengths, const std::map<int, int>& k_of,
                        std::optional<int> hidden, std::uint64_t seed) {
  if (lengths.empty()) throw Error(Errc::invalid_argument, "coder needs at least one payload length");
  if (hidden && *hidden < 1) throw Error(Errc::invalid_argument, "hidden width must be >= 1");
  std::map<int, CodecPair> pairs;
  for (int m : lengths) {
    auto it = k_of.find(m);
    if (it == k_of.end()) throw Error(Errc::invalid_argument, "no channel dimension for length " + std::to_string(m));
    const int k = it->second;
    if (k < 1) throw Error(Errc::invalid_argument, "channel dimension k must be >= 1 (length " + std::to_string(m) + ")");
    if (m < 1) throw Error(Errc::invalid_argument, "payload length must be >= 1");
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
    CodecPair p;
    p.m = m;
    p.k = k;
    if (hidden) {
      p.arch = CoderArch::hidden_tanh;
      p.hidden = *hidden;
      p.encoder = {random_layer(m, *hidden, rng), random_layer(*hidden, k, rng)};
      p.decoder = {random_layer(k, *hidden, rng), random_layer(*hidden, m, rng)};
    } else {
      p.encoder = {random_layer(m, k, rng)};
      p.decoder = {random_layer(k, m, rng)};
    }
    pairs.emplace(m, std::move(p));
  }
  return ChannelCoder(std::move(pairs));
}

ChannelCoder identity_coder(std::span<const int> lengths) {
  std::map<int, CodecPair> pairs;
  for (int m : lengths) {
    CodecPair p;
    p.m = m;
    p.k = m;
    p.encoder = {identity_layer(m)};
    p.decoder = {identity_layer(m)};
    pairs.emplace(m, std::move(p));
  }
  return ChannelCoder(std::move(pairs));
}

ForwardResult coder_forward(const ChannelCoder& coder, int m, std::span<const double> payload,
                            const ChannelConfig& cfg) {
  const auto& pair = coder.pair(m);
  if (static_cast<int>(payload.size()) != m) {
    throw Error(Errc::invalid_argument, "payload length " + std::to_string(payload.size()) +
                                            " does not match codec length " + std::to_string(m));
  }
  ForwardResult r;
  auto normalized = power_normalize(pair.encode(payload));
  r.x_sent = std::move(normalized.x);
  r.scale = normalized.scale;
  r.y_received = awgn(r.x_sent, cfg);
  r.payload_hat = pair.decode(r.y_received);
  for (double& v : r.payload_hat) v *= r.scale;
  return r;
}

// ---------------------------------------------------------------------------
// Backpropagation

std::vector<double> flatten_params(const CodecPair& pair) {
  std::vector<double> flat;
  flat.reserve(pair.num_params());
  for (const auto* stack : {&pair.encoder, &pair.decoder}) {
    for (const auto& l : *stack) {
      flat.insert(flat.end(), l.weight.begin(), l.weight.end());
      flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
  }
  return flat;
}

void assign_params(CodecPair& pair, std::span<const double> flat) {
  if (flat.size() != pair.num_params()) throw Error(Errc::invalid_argument, "parameter count mismatch");
  std::size_t pos = 0;
  for (auto* stack : {&pair.encoder, &pair.decoder}) {
    for (auto& l : *stack) {
      std::copy_n(flat.begin() + pos, l.weight.size(), l.weight.begin());
      pos += l.weight.size();
      std::copy_n(flat.begin() + pos, l.bias.size(), l.bias.begin());
      pos += l.bias.size();
    }
  }
}

namespace {

// Activations of every layer boundary; acts[0] is the input, acts[l+1] the
// post-activation output of layer l (tanh except after the last layer).
std::vector<std::vector<double>> forward_cached(const std::vector<DenseLayer>& layers,
                                                std::span<const double> x) {
  std::vector<std::vector<double>> acts;
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto a = layers[l].forward(acts.back());
    if (l + 1 < layers.size())
      for (double& v : a) v = std::tanh(v);
    acts.push_back(std::move(a));
  }
  return acts;
}

// Accumulates parameter gradients into grad[offset...] and returns dL/dinput.
std::vector<double> backward_stack(const std::vector<DenseLayer>& layers,
                                   const std::vector<std::vector<double>>& acts,
                                   std::vector<double> g, std::span<double> grad) {
  std::vector<std::size_t> offsets(layers.size());
  std::size_t pos = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offsets[l] = pos;
    pos += layers[l].weight.size() + layers[l].bias.size();
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    if (l + 1 < layers.size()) {
      // Output of this layer went through tanh.
      const auto& a = acts[l + 1];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - a[i] * a[i];
    }
    const auto& input = acts[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + layer.weight.size();
    std::vector<double> g_in(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double go = g[o];
      gb[o] += go;
      const double* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
      double* gwo = gw + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        gwo[i] += go * input[i];
        g_in[i] += w[i] * go;
      }
    }
    g = std::move(g_in);
  }
  return g;
}

std::size_t stack_params(const std::vector<DenseLayer>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

}  // namespace

LossGradient loss_and_gradient(const CodecPair& pair, std::span<const std::vector<double>> payloads,
                               std::span<const std::vector<double>> noise) {
  if (payloads.empty() || noise.size() != payloads.size()) {
    throw Error(Errc::invalid_argument, "need one noise vector per payload");
  }
  LossGradient out;
  out.gradient.assign(pair.num_params(), 0.0);
  const std::size_t enc_params = stack_params(pair.encoder);
  std::span<double> g_enc(out.gradient.data(), enc_params);
  std::span<double> g_dec(out.gradient.data() + enc_params, out.gradient.size() - enc_params);
  const double m = pair.m;
  const double k = pair.k;
  const double inv_batch = 1.0 / static_cast<double>(payloads.size());

  for (std::size_t b = 0; b < payloads.size(); ++b) {
    const auto& p = payloads[b];
    const auto enc_acts = forward_cached(pair.encoder, p);
    const auto& z = enc_acts.back();
    double energy = 0.0;
    for (double v : z) energy += v * v;
    if (!(energy > 0.0)) throw Error(Errc::degenerate_power, "encoder produced a zero-power block");
    const double s = std::sqrt(energy / k);
    std::vector<double> y(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] / s + noise[b][i];
    const auto dec_acts = forward_cached(pair.decoder, y);
    const auto& u = dec_acts.back();

    double loss = 0.0;
    std::vector<double> g_u(u.size());
    double g_s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double diff = s * u[i] - p[i];
      loss += diff * diff;
      const double g_hat = 2.0 * diff / m * inv_batch;
      g_u[i] = s * g_hat;
      g_s += u[i] * g_hat;
    }
    out.loss += loss / m * inv_batch;

    // Noise is a constant, so dL/dx = dL/dy.
    const auto g_x = backward_stack(pair.decoder, dec_acts, std::move(g_u), g_dec);
    std::vector<double> g_z(z.size());
    double zg = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      g_z[i] = g_x[i] / s;
      zg += g_x[i] * z[i];
    }
    g_s -= zg / (s * s);
    for (std::size_t i = 0; i < z.size(); ++i) g_z[i] += g_s * z[i] / (k * s);
    backward_stack(pair.encoder, enc_acts, std::move(g_z), g_enc);
  }
  return out;
}

ChannelCoder train_coder(ChannelCoder coder, const std::map<int, std::vector<std::vector<double>>>& payloads,
                         const TrainOptions& options) {
  if (options.epochs < 1 || options.batch < 1 || !(options.lr > 0.0)) {
    throw Error(Errc::invalid_argument, "epochs, batch and lr must be positive");
  }
  if (!options.noiseless && !(options.snr_lo_db <= options.snr_hi_db)) {
    throw Error(Errc::invalid_argument, "SNR range must satisfy lo <= hi");
  }
  for (const auto& [m, set] : payloads) {
    coder.pair(m);  // throws for unsupported lengths
    if (set.empty()) throw Error(Errc::invalid_argument, "no training payloads for length " + std::to_string(m));
    for (const auto& p : set) {
      if (static_cast<int>(p.size()) != m) {
        throw Error(Errc::invalid_argument, "training payload has wrong length for m=" + std::to_string(m));
      }
    }
  }

  struct AdamState {
    std::vector<double> first, second;
    std::int64_t step = 0;
  };
  std::map<int, AdamState> adam;
  std::map<int, TrainingRecord> records;
  for (const auto& [m, set] : payloads) {
    const auto n = coder.pair(m).num_params();
    adam[m] = {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
    records[m] = {options.epochs, options.lr, 0.0, {}};
  }

  Rng rng(options.seed);
  std::map<int, std::vector<std::size_t>> orders;
  for (const auto& [m, set] : payloads) {
    orders[m].resize(set.size());
    std::iota(orders[m].begin(), orders[m].end(), 0);
  }

  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (const auto& [m, set] : payloads) {
      auto& pair = coder.pair(m);
      auto& order = orders[m];
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1))]);
      }
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < order.size(); start += options.batch) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch));
        std::vector<std::vector<double>> batch, noise;
        const double snr = options.snr_lo_db + uniform01(rng) * (options.snr_hi_db - options.snr_lo_db);
        std::normal_distribution<double> gauss(0.0, options.noiseless ? 1.0 : std::sqrt(snr_to_sigma2(snr)));
        for (std::size_t i = start; i < end; ++i) {
          batch.push_back(set[order[i]]);
          std::vector<double> n(pair.k, 0.0);
          if (!options.noiseless)
            for (double& v : n) v = gauss(rng);
          noise.push_back(std::move(n));
        }
        auto lg = loss_and_gradient(pair, batch, noise);
        if (!std::isfinite(lg.loss)) {
          std::ostringstream msg;
          msg << "training diverged at epoch " << epoch << " (lr " << options.lr << ", length " << m << ")";
          throw Error(Errc::divergence, msg.str());
        }
        epoch_loss += lg.loss * static_cast<double>(end - start);

        auto params = flatten_params(pair);
        if (options.optimizer == Optimizer::sgd) {
          for (std::size_t i = 0; i < params.size(); ++i) params[i] -= options.lr * lg.gradient[i];
        } else {
          auto& st = adam[m];
          ++st.step;
          const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
          const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
          for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = lg.gradient[i];
            st.first[i] = beta1 * st.first[i] + (1.0 - beta1) * g;
            st.second[i] = beta2 * st.second[i] + (1.0 - beta2) * g * g;
            params[i] -= options.lr * (st.first[i] / c1) / (std::sqrt(st.second[i] / c2) + adam_eps);
          }
        }
        for (double v : params) {
          if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "parameters diverged at epoch " << epoch << " (lr " << options.lr << ", length " << m << ")";
            throw Error(Errc::divergence, msg.str());
          }
        }
        assign_params(pair, params);
      }
      epoch_loss /= static_cast<double>(order.size());
      records[m].epoch_loss.push_back(epoch_loss);
      records[m].final_loss = epoch_loss;
    }
  }
  for (auto& [m, rec] : records) coder.records()[m] = std::move(rec);
  return coder;
}

}  // namespace pgmsc
