#include "pgmsc/latent.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "pgmsc/error.hpp"
#include "pgmsc/random.hpp"

namespace pgmsc {

FeatureSchema::FeatureSchema(std::vector<int> block_dims) : dims_(std::move(block_dims)) {
  if (dims_.size() < 2) {
    throw Error(Errc::invalid_argument, "schema needs at least 2 features");
  }
  offsets_.assign(dims_.size() + 1, 0);
  for (std::size_t f = 0; f < dims_.size(); ++f) {
    if (dims_[f] < 1) {
      throw Error(Errc::invalid_argument,
                  "feature " + std::to_string(f) + " has block width < 1");
    }
    offsets_[f + 1] = offsets_[f] + dims_[f];
  }
}

FeatureSchema FeatureSchema::uniform(int num_features, int block_dim) {
  if (num_features < 0) throw Error(Errc::invalid_argument, "negative feature count");
  return FeatureSchema(std::vector<int>(num_features, block_dim));
}

int FeatureSchema::dims_of(std::span<const int> features) const {
  int total = 0;
  for (int f : features) total += block_dim(f);
  return total;
}

std::uint64_t FeatureSchema::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_u32 = [&h](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      h ^= (v >> (8 * i)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  };
  mix_u32(static_cast<std::uint32_t>(dims_.size()));
  for (int d : dims_) mix_u32(static_cast<std::uint32_t>(d));
  return h;
}

LatentVector::LatentVector(const FeatureSchema& schema, std::vector<double> values)
    : values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != schema.total_dim()) {
    throw Error(Errc::schema_mismatch,
                "latent vector has " + std::to_string(values_.size()) +
                    " entries, schema expects " + std::to_string(schema.total_dim()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(Errc::parse, "non-finite latent entry at index " + std::to_string(i));
    }
  }
}

LatentVector LatentVector::from_blocks(const FeatureSchema& schema,
                                       const std::vector<std::vector<double>>& blocks) {
  if (static_cast<int>(blocks.size()) != schema.num_features()) {
    throw Error(Errc::schema_mismatch, "block count does not match schema");
  }
  std::vector<double> flat;
  flat.reserve(schema.total_dim());
  for (int f = 0; f < schema.num_features(); ++f) {
    if (static_cast<int>(blocks[f].size()) != schema.block_dim(f)) {
      throw Error(Errc::schema_mismatch, "block " + std::to_string(f) + " has wrong width");
    }
    flat.insert(flat.end(), blocks[f].begin(), blocks[f].end());
  }
  return LatentVector(schema, std::move(flat));
}

std::span<const double> LatentVector::block(const FeatureSchema& schema, int f) const {
  return std::span<const double>(values_).subspan(schema.offset(f), schema.block_dim(f));
}

void validate_states(const QuantizedLatent& q, std::span<const int> cardinalities) {
  if (q.states.size() != cardinalities.size()) {
    throw Error(Errc::schema_mismatch, "state vector length does not match cardinalities");
  }
  for (std::size_t f = 0; f < cardinalities.size(); ++f) {
    if (q.states[f] < 0 || q.states[f] >= cardinalities[f]) {
      throw Error(Errc::invalid_argument,
                  "state " + std::to_string(q.states[f]) + " of feature " +
                      std::to_string(f) + " outside [0, " +
                      std::to_string(cardinalities[f]) + ")");
    }
  }
}

Dataset::Dataset(FeatureSchema schema, std::vector<LatentVector> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
  if (rows_.empty()) throw Error(Errc::empty_dataset, "dataset has no rows");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (static_cast<int>(rows_[i].size()) != schema_.total_dim()) {
      throw Error(Errc::schema_mismatch, "row " + std::to_string(i) + " does not match schema");
    }
  }
}

namespace {

std::string column_name(int f, int j) {
  return "f" + std::to_string(f) + "_" + std::to_string(j);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw Error(Errc::empty_dataset, "empty dataset file: " + path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto cols = split_csv_line(line);
  for (auto& c : cols) c = trim(c);
  return cols;
}

}  // namespace

FeatureSchema infer_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  const auto header = read_header(in, path);
  std::map<int, int> widths;
  for (const auto& name : header) {
    int f = -1, j = -1;
    char tail = 0;
    if (std::sscanf(name.c_str(), "f%d_%d%c", &f, &j, &tail) != 2 || f < 0 || j < 0) {
      throw Error(Errc::schema_mismatch, "unrecognized column '" + name + "'");
    }
    widths[f] = std::max(widths[f], j + 1);
  }
  std::vector<int> dims;
  for (const auto& [f, w] : widths) {
    if (f != static_cast<int>(dims.size())) {
      throw Error(Errc::schema_mismatch, "missing column block for feature " +
                                             std::to_string(dims.size()));
    }
    dims.push_back(w);
  }
  return FeatureSchema(std::move(dims));
}

Dataset load_dataset(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  const auto header = read_header(in, path);

  std::vector<std::string> expected;
  for (int f = 0; f < schema.num_features(); ++f)
    for (int j = 0; j < schema.block_dim(f); ++j) expected.push_back(column_name(f, j));

  for (std::size_t c = 0; c < expected.size(); ++c) {
    if (c >= header.size() || header[c] != expected[c]) {
      const bool present = std::find(header.begin(), header.end(), expected[c]) != header.end();
      throw Error(Errc::schema_mismatch,
                  present ? "column " + expected[c] + " out of order"
                          : "missing column " + expected[c]);
    }
  }
  if (header.size() > expected.size()) {
    throw Error(Errc::schema_mismatch, "unexpected column " + header[expected.size()]);
  }

  std::vector<LatentVector> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != expected.size()) {
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(expected.size()) + " cells, got " +
                                   std::to_string(cells.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (first != last && *first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, values[c]);
      if (ec != std::errc() || ptr != last || cell.empty() || !std::isfinite(values[c])) {
        throw Error(Errc::parse, "line " + std::to_string(line_no) + ", column " +
                                     expected[c] + ": cannot parse '" + cell + "'");
      }
    }
    rows.emplace_back(schema, std::move(values));
  }
  if (rows.empty()) throw Error(Errc::empty_dataset, "no data rows in " + path.string());
  return Dataset(schema, std::move(rows));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  const auto& schema = ds.schema();
  bool first = true;
  for (int f = 0; f < schema.num_features(); ++f) {
    for (int j = 0; j < schema.block_dim(f); ++j) {
      if (!first) out << ',';
      out << column_name(f, j);
      first = false;
    }
  }
  out << '\n';
  char buf[32];
  for (const auto& row : ds.rows()) {
    const auto values = row.values();
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (c) out << ',';
      // %.17g round-trips every binary64 exactly.
      std::snprintf(buf, sizeof(buf), "%.17g", values[c]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed) {
  const std::size_t n = ds.size();
  if (n < 2) throw Error(Errc::invalid_split, "need at least 2 rows to split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::invalid_split, "train fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw Error(Errc::invalid_split, "split leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Fisher-Yates with our own index draw so the permutation is stable across
  // standard library implementations.
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<LatentVector> train, test;
  train.reserve(n_train);
  test.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : test).push_back(ds.rows()[order[i]]);
  }
  return {Dataset(ds.schema(), std::move(train)), Dataset(ds.schema(), std::move(test))};
}

}  // namespace pgmsc
