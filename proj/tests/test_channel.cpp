#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pgmsc/channel.hpp"
#include "pgmsc/error.hpp"
#include "pgmsc/random.hpp"

using namespace pgmsc;

namespace {

std::vector<std::vector<double>> random_payloads(int count, int m, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<std::vector<double>> out(count, std::vector<double>(m));
  for (auto& p : out)
    for (double& x : p) x = g(rng);
  return out;
}

double mean_square(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

double max_rel_gradient_error(const CodecPair& pair, const std::vector<std::vector<double>>& payloads,
                              const std::vector<std::vector<double>>& noise) {
  const auto analytic = loss_and_gradient(pair, payloads, noise).gradient;
  auto params = flatten_params(pair);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    CodecPair plus = pair, minus = pair;
    auto pp = params, pm = params;
    pp[i] += h;
    pm[i] -= h;
    assign_params(plus, pp);
    assign_params(minus, pm);
    const double numeric =
        (loss_and_gradient(plus, payloads, noise).loss - loss_and_gradient(minus, payloads, noise).loss) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST(SnrToSigma2, Values) {
  EXPECT_DOUBLE_EQ(snr_to_sigma2(0.0), 1.0);
  EXPECT_NEAR(snr_to_sigma2(10.0), 0.1, 1e-15);
  EXPECT_NEAR(snr_to_sigma2(22.0), 0.0063096, 1e-7);
}

TEST(PowerNormalize, Examples) {
  auto a = power_normalize(std::vector<double>{1, 1, 1, 1});
  EXPECT_EQ(a.x, (std::vector<double>{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(a.scale, 1.0);
  auto b = power_normalize(std::vector<double>{2, 0, 0, 0});
  EXPECT_EQ(b.x, (std::vector<double>{2, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(b.scale, 1.0);
  auto c = power_normalize(std::vector<double>{3, 4});
  EXPECT_NEAR(c.scale, std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(mean_square(c.x), 1.0, 1e-12);
  try {
    power_normalize(std::vector<double>{0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_power);
  }
}

TEST(Awgn, NoiselessAndDeterministic) {
  const std::vector<double> x = {0.5, -1.0, 2.0};
  EXPECT_EQ(awgn(x, ChannelConfig{kNoiselessSnr, 1}), x);
  EXPECT_EQ(awgn(x, ChannelConfig{3.0, 9}), awgn(x, ChannelConfig{3.0, 9}));
  EXPECT_NE(awgn(x, ChannelConfig{3.0, 9}), awgn(x, ChannelConfig{3.0, 10}));
}

TEST(Awgn, EmpiricalVarianceMatchesSnr) {
  const std::vector<double> zeros(1000000, 0.0);
  for (double snr : {-5.0, 0.0, 5.0, 22.0}) {
    const auto y = awgn(zeros, ChannelConfig{snr, 31});
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(y.size() - 1);
    EXPECT_NEAR(var / snr_to_sigma2(snr), 1.0, 0.01) << snr;
  }
}

TEST(InitCoder, DeterministicAndWithinFanInBound) {
  const std::vector<int> lengths = {3, 8};
  const std::map<int, int> k_of = {{3, 2}, {8, 5}};
  for (std::optional<int> hidden : {std::optional<int>{}, std::optional<int>{6}}) {
    const auto a = init_coder(lengths, k_of, hidden, 4);
    EXPECT_EQ(a, init_coder(lengths, k_of, hidden, 4));
    for (const auto& [m, p] : a.pairs()) {
      for (const auto* side : {&p.encoder, &p.decoder})
        for (const auto& layer : *side) {
          const double bound = std::sqrt(1.0 / layer.in);
          for (double w : layer.weight) EXPECT_LE(std::abs(w), bound);
          for (double b : layer.bias) EXPECT_LE(std::abs(b), bound);
        }
    }
  }
  EXPECT_THROW(init_coder(lengths, {{3, 0}, {8, 5}}, std::nullopt, 1), Error);
  EXPECT_THROW(init_coder(std::vector<int>{}, k_of, std::nullopt, 1), Error);
}

TEST(CoderForward, IdentityNoiselessReproducesPayload) {
  const std::vector<int> lengths = {4};
  const auto coder = identity_coder(lengths);
  const std::vector<double> p = {0.3, -2.0, 7.25, 0.001};
  const auto r = coder_forward(coder, 4, p, ChannelConfig{kNoiselessSnr, 0});
  ASSERT_EQ(r.payload_hat.size(), 4u);
  // Normalizing and rescaling may move the last bit.
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.payload_hat[i], p[i], 1e-12 * std::abs(p[i]) + 1e-300);
  EXPECT_THROW(coder_forward(coder, 5, std::vector<double>(5, 1.0), ChannelConfig{0.0, 0}), Error);
}

TEST(CoderForward, UnitPowerForAnyPayload) {
  const std::vector<int> lengths = {2, 6};
  const auto coder = init_coder(lengths, {{2, 3}, {6, 4}}, std::nullopt, 8);
  for (const auto& p : random_payloads(200, 6, 5, 50.0)) {
    const auto r = coder_forward(coder, 6, p, ChannelConfig{0.0, 1});
    EXPECT_EQ(r.x_sent.size(), 4u);
    EXPECT_NEAR(mean_square(r.x_sent), 1.0, 1e-9);
  }
}

TEST(Backprop, MatchesCentralDifferences) {
  const std::vector<int> lengths = {3};
  for (std::optional<int> hidden : {std::optional<int>{}, std::optional<int>{4}}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto coder = init_coder(lengths, {{3, 2}}, hidden, seed);
      const auto payloads = random_payloads(6, 3, seed + 10);
      const auto noise = random_payloads(6, 2, seed + 20, 0.5);
      EXPECT_LT(max_rel_gradient_error(coder.pair(3), payloads, noise), 1e-4);
    }
  }
}

TEST(TrainCoder, AffineNoiselessReachesTinyError) {
  const std::vector<int> lengths = {4};
  auto coder = init_coder(lengths, {{4, 4}}, std::nullopt, 3);
  TrainOptions opt;
  opt.noiseless = true;
  opt.epochs = 500;
  opt.lr = 1e-2;
  opt.batch = 32;
  opt.seed = 1;
  const auto trained = train_coder(coder, {{4, random_payloads(64, 4, 2)}}, opt);
  const auto& rec = trained.records().at(4);
  EXPECT_EQ(rec.epochs, 500);
  EXPECT_EQ(rec.epoch_loss.size(), 500u);
  EXPECT_LT(rec.final_loss, 1e-6);
  // Held-out payloads confirm an invertible pair, not memorization.
  double err = 0.0;
  const auto test = random_payloads(100, 4, 99);
  for (const auto& p : test) {
    const auto r = coder_forward(trained, 4, p, ChannelConfig{kNoiselessSnr, 0});
    for (int i = 0; i < 4; ++i) err += (r.payload_hat[i] - p[i]) * (r.payload_hat[i] - p[i]) / 400.0;
  }
  EXPECT_LT(err, 1e-6);
}

TEST(TrainCoder, SmoothedLossIsNonIncreasingWhenNoiseless) {
  const std::vector<int> lengths = {4};
  auto coder = init_coder(lengths, {{4, 4}}, std::nullopt, 5);
  TrainOptions opt;
  opt.noiseless = true;
  opt.epochs = 200;
  opt.lr = 1e-2;
  opt.optimizer = Optimizer::sgd;
  opt.seed = 2;
  const auto trained = train_coder(coder, {{4, random_payloads(64, 4, 6)}}, opt);
  const auto& loss = trained.records().at(4).epoch_loss;
  double prev = INFINITY;
  for (std::size_t start = 0; start + 10 <= loss.size(); start += 10) {
    const double avg = std::accumulate(loss.begin() + start, loss.begin() + start + 10, 0.0) / 10.0;
    EXPECT_LE(avg, prev * (1 + 1e-12));
    prev = avg;
  }
}

TEST(TrainCoder, DeterministicAndErrorGrowsAsSnrFalls) {
  const std::vector<int> lengths = {6};
  const auto coder = init_coder(lengths, {{6, 6}}, std::nullopt, 11);
  TrainOptions opt;
  opt.epochs = 60;
  opt.lr = 3e-3;
  opt.seed = 4;
  const std::map<int, std::vector<std::vector<double>>> data = {{6, random_payloads(256, 6, 12)}};
  const auto a = train_coder(coder, data, opt);
  EXPECT_EQ(a, train_coder(coder, data, opt));

  const auto test = random_payloads(1000, 6, 77);
  double prev = -1.0;
  for (double snr : {5.0, 0.0, -5.0}) {
    double err = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto r = coder_forward(a, 6, test[i], ChannelConfig{snr, 1000 + i});
      for (int j = 0; j < 6; ++j) err += (r.payload_hat[j] - test[i][j]) * (r.payload_hat[j] - test[i][j]);
    }
    EXPECT_GT(err, prev);
    prev = err;
  }
}

TEST(TrainCoder, DivergenceIsReported) {
  const std::vector<int> lengths = {3};
  const auto coder = init_coder(lengths, {{3, 3}}, std::nullopt, 1);
  TrainOptions opt;
  opt.optimizer = Optimizer::sgd;
  opt.lr = 1e6;
  opt.epochs = 50;
  try {
    train_coder(coder, {{3, random_payloads(32, 3, 1, 100.0)}}, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::divergence);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(TrainCoder, RejectsUnsupportedLengths) {
  const std::vector<int> lengths = {3};
  const auto coder = init_coder(lengths, {{3, 3}}, std::nullopt, 1);
  EXPECT_THROW(train_coder(coder, {{4, random_payloads(4, 4, 1)}}, TrainOptions{}), Error);
}
