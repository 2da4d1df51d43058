#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pgmsc/error.hpp"
#include "pgmsc/metrics.hpp"
#include "pgmsc/random.hpp"

using namespace pgmsc;

TEST(Mse, Basics) {
  const std::vector<double> z = {0, 0}, o = {1, 1};
  EXPECT_EQ(mse(z, z), 0.0);
  EXPECT_EQ(mse(z, o), 1.0);
  EXPECT_THROW(mse(z, std::vector<double>{1}), Error);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(Mse, AgreesWithCompensatedSummation) {
  Rng rng(3);
  std::vector<double> a(10000), b(10000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = 1e3 * (uniform01(rng) - 0.5);
    b[i] = a[i] + (uniform01(rng) - 0.5);
  }
  double sum = 0.0, c = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double y = (a[i] - b[i]) * (a[i] - b[i]) - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  EXPECT_NEAR(mse(a, b), sum / a.size(), 1e-12);
}

TEST(Psnr, Values) {
  EXPECT_NEAR(psnr_from_mse(0.01, 1.0), 20.0, 1e-12);
  EXPECT_NEAR(psnr_from_mse(1.0, 255.0), 48.1308, 1e-3);
  const std::vector<double> a = {1, 2, 3};
  EXPECT_TRUE(std::isinf(psnr(a, a, 1.0)));
  EXPECT_GT(psnr(a, a, 1.0), 0.0);
  EXPECT_THROW(psnr(a, a, 0.0), Error);
}

TEST(Psnr, SymmetricAndDecreasingInMse) {
  Rng rng(1);
  std::vector<double> a(20), b(20);
  for (auto& x : a) x = uniform01(rng);
  for (auto& x : b) x = uniform01(rng);
  EXPECT_EQ(psnr(a, b, 2.0), psnr(b, a, 2.0));
  double prev = INFINITY;
  for (double m = 1e-6; m < 1e3; m *= 1.7) {
    const double p = psnr_from_mse(m, 2.0);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(CompressionRatio, Reduction) {
  EXPECT_EQ(compression_ratio(2, 96), (Ratio{1, 48}));
  EXPECT_EQ(compression_ratio(7, 7), (Ratio{1, 1}));
  EXPECT_EQ(compression_ratio(9, 981), (Ratio{1, 109}));
  EXPECT_THROW(compression_ratio(0, 5), Error);
  for (std::int64_t k = 1; k < 60; ++k)
    for (std::int64_t n = 1; n < 60; ++n) {
      const auto r = compression_ratio(k, n);
      EXPECT_EQ(r.k * n, k * r.n);
    }
}

TEST(StateAccuracy, Fixtures) {
  const std::vector<QuantizedLatent> t = {{{0, 1}}, {{2, 2}}};
  EXPECT_EQ(state_accuracy(t, t), 1.0);
  const std::vector<QuantizedLatent> one = {{{0}}}, other = {{{1}}};
  EXPECT_EQ(state_accuracy(one, other), 0.0);
  const std::vector<QuantizedLatent> half = {{{0, 0}}, {{2, 2}}};
  EXPECT_EQ(state_accuracy(t, half), 0.75);
  const std::vector<QuantizedLatent> h1 = {{{0, 1, 2, 3}}}, h2 = {{{0, 1, 0, 0}}};
  EXPECT_EQ(state_accuracy(h1, h2), 0.5);
  EXPECT_THROW(state_accuracy(t, one), Error);
}

TEST(ReportsCsv, RoundTripIncludingInfinity) {
  std::vector<EvalReport> reports = {
      {-5.0, {1, 2}, 17.123456789012345, 0.0123, 0.75, 200, 6, "pgm"},
      {22.0, {1, 1}, INFINITY, 0.0, 1.0, 10, 0, "random"},
  };
  std::stringstream ss;
  write_reports_csv(ss, reports);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "snr_db,ratio_k,ratio_n,psnr_db,mse,state_accuracy,n_samples,n_discard,method");
  EXPECT_NE(text.find("inf"), std::string::npos);
  EXPECT_EQ(read_reports_csv(ss), reports);
  std::stringstream bad("nope\n");
  EXPECT_THROW(read_reports_csv(bad), Error);
}
