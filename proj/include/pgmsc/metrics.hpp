#ifndef PGMSC_METRICS_HPP_
#define PGMSC_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pgmsc/latent.hpp"

namespace pgmsc {

double mse(std::span<const double> a, std::span<const double> b);

// 10 log10(max_value^2 / mse); +inf when mse == 0.
double psnr(std::span<const double> a, std::span<const double> b, double max_value);
double psnr_from_mse(double mse_value, double max_value);

struct Ratio {
  std::int64_t k = 1;
  std::int64_t n = 1;

  double value() const { return static_cast<double>(k) / static_cast<double>(n); }
  bool operator==(const Ratio&) const = default;
};

// k/n reduced to lowest terms.
Ratio compression_ratio(std::int64_t k, std::int64_t n);

double state_accuracy(std::span<const QuantizedLatent> truth, std::span<const QuantizedLatent> recovered);

struct EvalReport {
  double snr_db = 0.0;
  Ratio ratio;
  double psnr_db = 0.0;
  double mse = 0.0;
  double state_accuracy = 0.0;
  std::int64_t n_samples = 0;
  int n_discard = 0;
  std::string method = "pgm";  // "pgm" or "random"

  bool operator==(const EvalReport&) const = default;
};

// Columns: snr_db,ratio_k,ratio_n,psnr_db,mse,state_accuracy,n_samples,
// n_discard,method. Reals use %.17g; +inf is written as "inf".
void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports);
void save_reports_csv(const std::filesystem::path& path, std::span<const EvalReport> reports);
std::vector<EvalReport> read_reports_csv(std::istream& in);
std::vector<EvalReport> load_reports_csv(const std::filesystem::path& path);

// Fixed-width table for terminals.
void print_summary(std::ostream& out, std::span<const EvalReport> reports);

}  // namespace pgmsc

#endif  // PGMSC_METRICS_HPP_
