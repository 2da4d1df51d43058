#include "pgmsc/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pgmsc/error.hpp"

namespace pgmsc {

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(Errc::invalid_argument, "mse needs two non-empty vectors of equal length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr_from_mse(double mse_value, double max_value) {
  if (!(max_value > 0.0)) throw Error(Errc::invalid_argument, "PSNR max value must be positive");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse_value);
}

double psnr(std::span<const double> a, std::span<const double> b, double max_value) {
  return psnr_from_mse(mse(a, b), max_value);
}

Ratio compression_ratio(std::int64_t k, std::int64_t n) {
  if (k < 1 || n < 1) throw Error(Errc::invalid_argument, "compression ratio needs k, n >= 1");
  const auto g = std::gcd(k, n);
  return {k / g, n / g};
}

double state_accuracy(std::span<const QuantizedLatent> truth, std::span<const QuantizedLatent> recovered) {
  if (truth.size() != recovered.size() || truth.empty()) {
    throw Error(Errc::invalid_argument, "state lists must be non-empty and of equal length");
  }
  std::size_t match = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].states.size() != recovered[i].states.size()) {
      throw Error(Errc::schema_mismatch, "state vectors differ in length at sample " + std::to_string(i));
    }
    for (std::size_t f = 0; f < truth[i].states.size(); ++f) {
      match += truth[i].states[f] == recovered[i].states[f];
      ++total;
    }
  }
  return static_cast<double>(match) / static_cast<double>(total);
}

namespace {

std::string fmt_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_real(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw Error(Errc::parse, "cannot parse number '" + s + "'");
  return v;
}

constexpr const char* kHeader =
    "snr_db,ratio_k,ratio_n,psnr_db,mse,state_accuracy,n_samples,n_discard,method";

}  // namespace

void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << kHeader << '\n';
  for (const auto& r : reports) {
    out << fmt_real(r.snr_db) << ',' << r.ratio.k << ',' << r.ratio.n << ',' << fmt_real(r.psnr_db) << ','
        << fmt_real(r.mse) << ',' << fmt_real(r.state_accuracy) << ',' << r.n_samples << ','
        << r.n_discard << ',' << r.method << '\n';
  }
}

void save_reports_csv(const std::filesystem::path& path, std::span<const EvalReport> reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  write_reports_csv(out, reports);
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

std::vector<EvalReport> read_reports_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw Error(Errc::parse, "unexpected report header");
  std::vector<EvalReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw Error(Errc::parse, "report row needs 9 cells: " + line);
    EvalReport r;
    r.snr_db = parse_real(cells[0]);
    r.ratio = {std::stoll(cells[1]), std::stoll(cells[2])};
    r.psnr_db = parse_real(cells[3]);
    r.mse = parse_real(cells[4]);
    r.state_accuracy = parse_real(cells[5]);
    r.n_samples = std::stoll(cells[6]);
    r.n_discard = std::stoi(cells[7]);
    r.method = cells[8];
    out.push_back(r);
  }
  return out;
}

std::vector<EvalReport> load_reports_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return read_reports_csv(in);
}

void print_summary(std::ostream& out, std::span<const EvalReport> reports) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %8s %8s %12s %10s %12s %10s %8s\n", "method", "snr_db", "discard",
                "k/n", "psnr_db", "mse", "state_acc", "samples");
  out << buf;
  for (const auto& r : reports) {
    const std::string ratio = std::to_string(r.ratio.k) + "/" + std::to_string(r.ratio.n);
    std::snprintf(buf, sizeof(buf), "%-8s %8.2f %8d %12s %10.3f %12.5g %10.4f %8lld\n", r.method.c_str(),
                  r.snr_db, r.n_discard, ratio.c_str(), r.psnr_db, r.mse, r.state_accuracy,
                  static_cast<long long>(r.n_samples));
    out << buf;
  }
}

}  // namespace pgmsc
